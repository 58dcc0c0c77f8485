//! Linear model representation and the bundled reference solver.
//!
//! Heuristics talk to a [`MipSolver`]; [`ReferenceSolver`] implements it with
//! a bounded-variable simplex core and depth-first/best-bound branch and
//! bound over the binary variables.

mod bnb;
pub mod lp_format;
mod model;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use bnb::ReferenceSolver;
pub use model::{MipModel, Role, Row, Sense, VarKey, Variable};

/// Work units per second of budget. A unit is one simplex pivot (or LP call)
/// on one constraint row, so the rate is roughly size-independent.
pub const WORK_RATE: f64 = 5.0e6;

/// Wall-clock allowance of a work-limited solve, as a multiple of its budget.
pub const WALL_SLACK: f64 = 4.0;

fn work_scale(model: &MipModel) -> f64 {
    model.rows().len().max(1) as f64
}

/// Pivot budget equivalent to `budget` on this model.
pub fn work_for(model: &MipModel, budget: Duration) -> u64 {
    (budget.as_secs_f64() * WORK_RATE / work_scale(model)).ceil() as u64
}

/// Budget time charged for `work` pivots on this model.
pub fn work_seconds(model: &MipModel, work: u64) -> Duration {
    Duration::from_secs_f64(work as f64 * work_scale(model) / WORK_RATE)
}

/// Periods whose binary variables keep integrality during a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegerWindow {
    /// Every binary variable is integral.
    All,
    /// Only binaries with a period in `first..=last` are integral.
    Periods { first: usize, last: usize },
    /// Pure LP relaxation.
    Relaxed,
}

impl IntegerWindow {
    pub fn contains(&self, period: usize) -> bool {
        match *self {
            IntegerWindow::All => true,
            IntegerWindow::Periods { first, last } => first <= period && period <= last,
            IntegerWindow::Relaxed => false,
        }
    }
}

/// Inputs of one solve: fixings, integrality window, warm start and budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveControl {
    /// Binary variables pinned to 0 or 1.
    pub fixings: BTreeMap<VarKey, bool>,
    pub integer_window: IntegerWindow,
    /// Full column assignment used to seed the incumbent when feasible.
    pub warm_start: Option<Vec<f64>>,
    pub time_limit: Duration,
    /// Relative optimality tolerance.
    pub gap_tolerance: f64,
    /// Optional cap on branch-and-bound nodes.
    pub node_limit: Option<u64>,
    /// Optional cap on simplex pivots. Unlike the time limit it is
    /// reproducible across runs.
    pub work_limit: Option<u64>,
}

impl SolveControl {
    pub fn new(time_limit: Duration) -> Self {
        SolveControl {
            fixings: BTreeMap::new(),
            integer_window: IntegerWindow::All,
            warm_start: None,
            time_limit,
            gap_tolerance: 1e-6,
            node_limit: None,
            work_limit: None,
        }
    }

    /// Full MIP without a practical time limit.
    pub fn unlimited() -> Self {
        SolveControl::new(Duration::from_secs(365 * 24 * 3600))
    }

    pub fn with_fixings(mut self, fixings: BTreeMap<VarKey, bool>) -> Self {
        self.fixings = fixings;
        self
    }

    pub fn with_window(mut self, window: IntegerWindow) -> Self {
        self.integer_window = window;
        self
    }

    pub fn with_warm_start(mut self, values: Vec<f64>) -> Self {
        self.warm_start = Some(values);
        self
    }

    pub fn with_work_limit(mut self, pivots: u64) -> Self {
        self.work_limit = Some(pivots);
        self
    }

    /// Reproducible budget: a pivot limit equivalent to `budget`, with a
    /// wall-clock backstop of `WALL_SLACK` times the budget capped at `wall`.
    pub fn with_budget(mut self, model: &MipModel, budget: Duration, wall: Duration) -> Self {
        self.work_limit = Some(work_for(model, budget));
        self.time_limit = budget.mul_f64(WALL_SLACK).min(wall);
        self
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.gap_tolerance = gap;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Time, node or work limit reached with an incumbent.
    Feasible,
    Infeasible,
    Unbounded,
    /// Time, node or work limit reached without an incumbent.
    NoSolution,
    NumericFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NoSolution => "no-solution",
            SolveStatus::NumericFailure => "numeric-failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub values: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub incumbent: Option<Incumbent>,
    /// Proven lower bound (+∞ when infeasible).
    pub dual_bound: f64,
    pub nodes: u64,
    /// Simplex pivots spent.
    pub work: u64,
    pub elapsed: Duration,
}

impl SolveResult {
    pub fn objective(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|inc| inc.objective)
    }
}

/// Anything able to solve a [`MipModel`] under a [`SolveControl`].
pub trait MipSolver: Sync {
    /// Solves the continuous relaxation (all integrality dropped).
    fn solve_lp(&self, model: &MipModel, control: &SolveControl) -> SolveResult;

    /// Solves with integrality on the unfixed binaries inside the window.
    fn solve_mip(&self, model: &MipModel, control: &SolveControl) -> SolveResult;
}
