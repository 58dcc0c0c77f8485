//! Solver toolkit for the capacitated three-level lot-sizing and
//! replenishment problem with a distribution structure, with optional storage
//! capacities at warehouses or retailers.
//!
//! The crate bundles an instance generator, two MIP formulations, a
//! self-contained branch-and-bound engine, the relax-and-fix /
//! fix-and-optimize hybrid heuristic, an exact enumeration oracle for tiny
//! instances, and benchmark tooling.

pub mod bench;
pub mod engine;
pub mod formulation;
pub mod heuristic;
pub mod instgen;
pub mod model;
pub mod validate;

pub use model::{FormulationKind, HeuristicParams, Instance, RfStrategy, Solution, SupplyNetwork};
