//! Domain types for the three-level plant → warehouse → retailer problem.
//!
//! Facilities are indexed canonically: `0` is the plant, `1..=W` are the
//! warehouses and `W+1..=W+R` are the retailers. Periods are zero-based
//! throughout the crate. Initial inventories are zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used for every feasibility and cost comparison.
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("retailer {retailer} is assigned to warehouse {warehouse}, but only {num_warehouses} warehouses exist")]
    UnknownWarehouse {
        retailer: usize,
        warehouse: usize,
        num_warehouses: usize,
    },
    #[error("horizon must be at least one period")]
    EmptyHorizon,
    #[error("{what} has {found} rows/columns, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} must be finite and nonnegative (facility {facility}, period {period}, value {value})")]
    Negative {
        what: &'static str,
        facility: usize,
        period: usize,
        value: f64,
    },
    #[error("storage capacity is only defined for warehouses and retailers")]
    PlantStorageCapacity,
    #[error("period range [{first}, {last}] is outside the horizon of {horizon} periods")]
    PeriodRange {
        first: usize,
        last: usize,
        horizon: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Plant,
    Warehouse,
    Retailer,
}

/// The distribution tree: one plant, its warehouses, and the retailers each
/// warehouse serves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplyNetwork {
    num_warehouses: usize,
    /// Warehouse (0-based) serving each retailer.
    assignment: Vec<usize>,
    /// Facility ids of the direct successors of each facility.
    children: Vec<Vec<usize>>,
}

impl SupplyNetwork {
    pub fn new(num_warehouses: usize, assignment: Vec<usize>) -> Result<Self, ModelError> {
        for (retailer, &warehouse) in assignment.iter().enumerate() {
            if warehouse >= num_warehouses {
                return Err(ModelError::UnknownWarehouse {
                    retailer,
                    warehouse,
                    num_warehouses,
                });
            }
        }
        let num_facilities = 1 + num_warehouses + assignment.len();
        let mut children = vec![Vec::new(); num_facilities];
        children[0] = (1..=num_warehouses).collect();
        for (retailer, &warehouse) in assignment.iter().enumerate() {
            children[1 + warehouse].push(1 + num_warehouses + retailer);
        }
        Ok(SupplyNetwork {
            num_warehouses,
            assignment,
            children,
        })
    }

    pub fn num_warehouses(&self) -> usize {
        self.num_warehouses
    }

    pub fn num_retailers(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_facilities(&self) -> usize {
        self.children.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn warehouse_facility(&self, warehouse: usize) -> usize {
        1 + warehouse
    }

    pub fn retailer_facility(&self, retailer: usize) -> usize {
        1 + self.num_warehouses + retailer
    }

    pub fn level(&self, facility: usize) -> Level {
        if facility == 0 {
            Level::Plant
        } else if facility <= self.num_warehouses {
            Level::Warehouse
        } else {
            Level::Retailer
        }
    }

    /// Direct successors δ(i), as facility ids.
    pub fn children(&self, facility: usize) -> &[usize] {
        &self.children[facility]
    }

    /// Direct predecessor; `None` for the plant.
    pub fn parent(&self, facility: usize) -> Option<usize> {
        match self.level(facility) {
            Level::Plant => None,
            Level::Warehouse => Some(0),
            Level::Retailer => {
                Some(self.warehouse_facility(self.assignment[facility - 1 - self.num_warehouses]))
            }
        }
    }

    /// Retailers (0-based) served by a warehouse (0-based).
    pub fn retailers_of(&self, warehouse: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &w)| w == warehouse)
            .map(|(r, _)| r)
    }

    /// Facility ids in leaf-to-root order, so children precede parents.
    pub fn bottom_up(&self) -> impl Iterator<Item = usize> {
        (0..self.num_facilities()).rev()
    }
}

/// Free-form provenance carried with an instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    #[serde(default)]
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    network: SupplyNetwork,
    horizon: usize,
    demand: Vec<Vec<u64>>,
    setup_cost: Vec<Vec<f64>>,
    holding_cost: Vec<Vec<f64>>,
    plant_capacity: Vec<Option<f64>>,
    storage_capacity: Vec<Vec<Option<f64>>>,
    aggregated: Vec<Vec<f64>>,
    pub meta: InstanceMeta,
}

fn check_matrix(
    what: &'static str,
    rows: &[Vec<f64>],
    num_rows: usize,
    horizon: usize,
) -> Result<(), ModelError> {
    if rows.len() != num_rows {
        return Err(ModelError::Dimension {
            what,
            expected: num_rows,
            found: rows.len(),
        });
    }
    for (facility, row) in rows.iter().enumerate() {
        if row.len() != horizon {
            return Err(ModelError::Dimension {
                what,
                expected: horizon,
                found: row.len(),
            });
        }
        for (period, &value) in row.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::Negative {
                    what,
                    facility,
                    period,
                    value,
                });
            }
        }
    }
    Ok(())
}

impl Instance {
    /// Builds an instance, validating every dimension and sign.
    ///
    /// `demand` is retailer × period; cost and storage matrices are
    /// facility × period. `storage_capacity[0]` (the plant) must be all `None`.
    pub fn new(
        network: SupplyNetwork,
        demand: Vec<Vec<u64>>,
        setup_cost: Vec<Vec<f64>>,
        holding_cost: Vec<Vec<f64>>,
        plant_capacity: Vec<Option<f64>>,
        storage_capacity: Vec<Vec<Option<f64>>>,
        meta: InstanceMeta,
    ) -> Result<Self, ModelError> {
        let horizon = demand.first().map(Vec::len).unwrap_or(0);
        if horizon == 0 && network.num_retailers() > 0 {
            return Err(ModelError::EmptyHorizon);
        }
        let horizon = if network.num_retailers() == 0 {
            setup_cost.first().map(Vec::len).unwrap_or(0)
        } else {
            horizon
        };
        if horizon == 0 {
            return Err(ModelError::EmptyHorizon);
        }
        if demand.len() != network.num_retailers() {
            return Err(ModelError::Dimension {
                what: "demand",
                expected: network.num_retailers(),
                found: demand.len(),
            });
        }
        if let Some(row) = demand.iter().find(|row| row.len() != horizon) {
            return Err(ModelError::Dimension {
                what: "demand",
                expected: horizon,
                found: row.len(),
            });
        }
        let num_facilities = network.num_facilities();
        check_matrix("setup_cost", &setup_cost, num_facilities, horizon)?;
        check_matrix("holding_cost", &holding_cost, num_facilities, horizon)?;
        if plant_capacity.len() != horizon {
            return Err(ModelError::Dimension {
                what: "plant_capacity",
                expected: horizon,
                found: plant_capacity.len(),
            });
        }
        for (period, cap) in plant_capacity.iter().enumerate() {
            if let Some(value) = *cap {
                if !(value >= 0.0) || value.is_nan() {
                    return Err(ModelError::Negative {
                        what: "plant_capacity",
                        facility: 0,
                        period,
                        value,
                    });
                }
            }
        }
        if storage_capacity.len() != num_facilities {
            return Err(ModelError::Dimension {
                what: "storage_capacity",
                expected: num_facilities,
                found: storage_capacity.len(),
            });
        }
        for (facility, row) in storage_capacity.iter().enumerate() {
            if row.len() != horizon {
                return Err(ModelError::Dimension {
                    what: "storage_capacity",
                    expected: horizon,
                    found: row.len(),
                });
            }
            for (period, cap) in row.iter().enumerate() {
                match cap {
                    Some(_) if facility == 0 => return Err(ModelError::PlantStorageCapacity),
                    Some(value) if !(*value >= 0.0) => {
                        return Err(ModelError::Negative {
                            what: "storage_capacity",
                            facility,
                            period,
                            value: *value,
                        })
                    }
                    _ => {}
                }
            }
        }
        let aggregated = aggregate(&network, &demand, horizon);
        Ok(Instance {
            network,
            horizon,
            demand,
            setup_cost,
            holding_cost,
            plant_capacity,
            storage_capacity,
            aggregated,
            meta,
        })
    }

    pub fn network(&self) -> &SupplyNetwork {
        &self.network
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_facilities(&self) -> usize {
        self.network.num_facilities()
    }

    /// Retailer × period demand.
    pub fn demand(&self) -> &[Vec<u64>] {
        &self.demand
    }

    pub fn setup_cost(&self, facility: usize, period: usize) -> f64 {
        self.setup_cost[facility][period]
    }

    pub fn holding_cost(&self, facility: usize, period: usize) -> f64 {
        self.holding_cost[facility][period]
    }

    pub fn setup_costs(&self) -> &[Vec<f64>] {
        &self.setup_cost
    }

    pub fn holding_costs(&self) -> &[Vec<f64>] {
        &self.holding_cost
    }

    /// `None` means the plant is uncapacitated in that period.
    pub fn plant_capacity(&self, period: usize) -> Option<f64> {
        self.plant_capacity[period]
    }

    pub fn plant_capacities(&self) -> &[Option<f64>] {
        &self.plant_capacity
    }

    /// `None` means unbounded storage.
    pub fn storage_capacity(&self, facility: usize, period: usize) -> Option<f64> {
        self.storage_capacity[facility][period]
    }

    pub fn storage_capacities(&self) -> &[Vec<Option<f64>>] {
        &self.storage_capacity
    }

    pub fn has_storage_capacity(&self) -> bool {
        self.storage_capacity
            .iter()
            .any(|row| row.iter().any(Option::is_some))
    }

    /// Returns a copy with storage capacities replaced.
    pub fn with_storage_capacity(
        &self,
        storage_capacity: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, ModelError> {
        Instance::new(
            self.network.clone(),
            self.demand.clone(),
            self.setup_cost.clone(),
            self.holding_cost.clone(),
            self.plant_capacity.clone(),
            storage_capacity,
            self.meta.clone(),
        )
    }

    /// Returns a copy with plant capacities replaced.
    pub fn with_plant_capacity(&self, plant_capacity: Vec<Option<f64>>) -> Result<Self, ModelError> {
        Instance::new(
            self.network.clone(),
            self.demand.clone(),
            self.setup_cost.clone(),
            self.holding_cost.clone(),
            plant_capacity,
            self.storage_capacity.clone(),
            self.meta.clone(),
        )
    }

    /// Aggregated demand d^i_t of one facility.
    pub fn facility_demand(&self, facility: usize, period: usize) -> f64 {
        self.aggregated[facility][period]
    }

    /// Facility × period aggregated demand matrix.
    pub fn aggregate_demands(&self) -> &[Vec<f64>] {
        &self.aggregated
    }

    /// Inclusive demand sum of a facility over periods `first..=last`.
    pub fn cumulative_demand(
        &self,
        facility: usize,
        first: usize,
        last: usize,
    ) -> Result<f64, ModelError> {
        if first > last || last >= self.horizon {
            return Err(ModelError::PeriodRange {
                first,
                last,
                horizon: self.horizon,
            });
        }
        Ok(self.aggregated[facility][first..=last].iter().sum())
    }

    /// Remaining demand d^i_{t|T|} from `period` to the end of the horizon.
    pub fn remaining_demand(&self, facility: usize, period: usize) -> f64 {
        self.aggregated[facility][period..].iter().sum()
    }

    pub fn total_demand(&self) -> f64 {
        self.aggregated[0].iter().sum()
    }
}

fn aggregate(network: &SupplyNetwork, demand: &[Vec<u64>], horizon: usize) -> Vec<Vec<f64>> {
    let mut agg = vec![vec![0.0; horizon]; network.num_facilities()];
    for (retailer, row) in demand.iter().enumerate() {
        let facility = network.retailer_facility(retailer);
        for (t, &d) in row.iter().enumerate() {
            agg[facility][t] = d as f64;
        }
    }
    // Children always carry higher ids than their parent.
    for facility in network.bottom_up() {
        if network.level(facility) == Level::Retailer {
            continue;
        }
        for t in 0..horizon {
            agg[facility][t] = network.children(facility).iter().map(|&c| agg[c][t]).sum();
        }
    }
    agg
}

/// A physical production/distribution plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Setup indicators, facility × period.
    pub y: Vec<Vec<f64>>,
    /// Production at the plant, inbound shipment elsewhere.
    pub x: Vec<Vec<f64>>,
    /// End-of-period physical inventory.
    pub s: Vec<Vec<f64>>,
    pub objective: f64,
}

impl Solution {
    /// Wraps a plan and evaluates its cost.
    pub fn new(
        instance: &Instance,
        y: Vec<Vec<f64>>,
        x: Vec<Vec<f64>>,
        s: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let n = instance.num_facilities();
        let horizon = instance.horizon();
        for (what, m) in [("y", &y), ("x", &x), ("s", &s)] {
            if m.len() != n {
                return Err(ModelError::Dimension {
                    what,
                    expected: n,
                    found: m.len(),
                });
            }
            if let Some(row) = m.iter().find(|row| row.len() != horizon) {
                return Err(ModelError::Dimension {
                    what,
                    expected: horizon,
                    found: row.len(),
                });
            }
        }
        let mut solution = Solution {
            y,
            x,
            s,
            objective: 0.0,
        };
        solution.objective = total_cost(instance, &solution);
        Ok(solution)
    }

    /// The empty plan: no setups, no flow, no stock.
    pub fn zero(instance: &Instance) -> Self {
        let zeros = vec![vec![0.0; instance.horizon()]; instance.num_facilities()];
        Solution {
            y: zeros.clone(),
            x: zeros.clone(),
            s: zeros,
            objective: 0.0,
        }
    }

    pub fn num_setups(&self) -> usize {
        self.y.iter().flatten().filter(|&&v| v > 0.5).count()
    }
}

/// Setup plus holding cost of a plan, evaluated on the physical variables.
pub fn total_cost(instance: &Instance, solution: &Solution) -> f64 {
    let mut cost = 0.0;
    for t in 0..instance.horizon() {
        for i in 0..instance.num_facilities() {
            cost += instance.setup_cost(i, t) * solution.y[i][t]
                + instance.holding_cost(i, t) * solution.s[i][t];
        }
    }
    cost
}

/// Echelon inventories: own stock plus all stock held downstream.
pub fn echelon_stock(network: &SupplyNetwork, s: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut echelon = s.to_vec();
    for facility in network.bottom_up() {
        for &child in network.children(facility) {
            for t in 0..echelon[facility].len() {
                echelon[facility][t] += echelon[child][t];
            }
        }
    }
    echelon
}

/// Inverse of [`echelon_stock`]: s^i_t = I^i_t − Σ_{j∈δ(i)} I^j_t.
pub fn physical_stock(network: &SupplyNetwork, echelon: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut s = echelon.to_vec();
    for facility in 0..network.num_facilities() {
        for &child in network.children(facility) {
            for t in 0..s[facility].len() {
                s[facility][t] -= echelon[child][t];
            }
        }
    }
    s
}

/// Holding-cost coefficient of I^i_t in the echelon objective:
/// hc^i − hc^{parent(i)} (hc^p for the plant).
pub fn echelon_holding_cost(instance: &Instance, facility: usize, period: usize) -> f64 {
    let own = instance.holding_cost(facility, period);
    match instance.network().parent(facility) {
        Some(parent) => own - instance.holding_cost(parent, period),
        None => own,
    }
}

/// Objective written in echelon variables; equals [`total_cost`] when
/// `echelon` was derived from the plan's physical stock.
pub fn echelon_cost(instance: &Instance, y: &[Vec<f64>], echelon: &[Vec<f64>]) -> f64 {
    let mut cost = 0.0;
    for t in 0..instance.horizon() {
        for i in 0..instance.num_facilities() {
            cost += instance.setup_cost(i, t) * y[i][t]
                + echelon_holding_cost(instance, i, t) * echelon[i][t];
        }
    }
    cost
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RfStrategy {
    /// Fix only setups that took value 1.
    S1,
    /// Fix every setup of the window prefix.
    S2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulationKind {
    Standard,
    Echelon,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("fo_window_min ({window}) must be at least fo_fix_min ({fix})")]
    FoWindow { window: usize, fix: usize },
    #[error("rf_window ({window}) must be at least rf_fix ({fix})")]
    RfWindow { window: usize, fix: usize },
    #[error("{0} must be a positive, finite number of seconds")]
    Budget(&'static str),
}

/// Control parameters of the hybrid heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    pub rf_window: usize,
    pub rf_fix: usize,
    pub rf_budget_seconds: f64,
    pub fo_window_min: usize,
    pub fo_fix_min: usize,
    pub fo_window_step: usize,
    pub fo_fix_step: usize,
    pub fo_min_rounds: usize,
    pub total_budget_seconds: f64,
    pub rf_strategy: RfStrategy,
    pub formulation: FormulationKind,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        HeuristicParams::with_total_budget(600.0)
    }
}

impl HeuristicParams {
    /// Default parameters with the relax-and-fix share set to ⌈0.10 · maxt⌉.
    pub fn with_total_budget(total_budget_seconds: f64) -> Self {
        HeuristicParams {
            rf_window: 5,
            rf_fix: 3,
            rf_budget_seconds: (0.10 * total_budget_seconds).ceil(),
            fo_window_min: 5,
            fo_fix_min: 3,
            fo_window_step: 0,
            fo_fix_step: 1,
            fo_min_rounds: 2,
            total_budget_seconds,
            rf_strategy: RfStrategy::S1,
            formulation: FormulationKind::Echelon,
        }
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        for (name, value) in [
            ("rf_window", self.rf_window),
            ("rf_fix", self.rf_fix),
            ("fo_window_min", self.fo_window_min),
            ("fo_fix_min", self.fo_fix_min),
            ("fo_min_rounds", self.fo_min_rounds),
        ] {
            if value == 0 {
                return Err(ParamsError::Zero(name));
            }
        }
        if self.rf_window < self.rf_fix {
            return Err(ParamsError::RfWindow {
                window: self.rf_window,
                fix: self.rf_fix,
            });
        }
        if self.fo_window_min < self.fo_fix_min {
            return Err(ParamsError::FoWindow {
                window: self.fo_window_min,
                fix: self.fo_fix_min,
            });
        }
        for (name, value) in [
            ("rf_budget_seconds", self.rf_budget_seconds),
            ("total_budget_seconds", self.total_budget_seconds),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamsError::Budget(name));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// One warehouse, two retailers, two periods.
    pub(crate) fn tiny1() -> Instance {
        let network = SupplyNetwork::new(1, vec![0, 0]).unwrap();
        Instance::new(
            network,
            vec![vec![5, 5], vec![0, 10]],
            vec![vec![100.0; 2], vec![10.0; 2], vec![1.0; 2], vec![1.0; 2]],
            vec![vec![0.25; 2], vec![0.5; 2], vec![1.0; 2], vec![1.0; 2]],
            vec![None; 2],
            vec![vec![None; 2]; 4],
            InstanceMeta {
                id: "TINY-1".into(),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn aggregates_single_warehouse() {
        let inst = tiny1();
        let agg = inst.aggregate_demands();
        assert_eq!(agg[0], vec![5.0, 15.0]);
        assert_eq!(agg[1], vec![5.0, 15.0]);
        assert_eq!(agg[2], vec![5.0, 5.0]);
        assert_eq!(agg[3], vec![0.0, 10.0]);
    }

    #[test]
    fn aggregates_disjoint_warehouses() {
        let network = SupplyNetwork::new(2, vec![0, 1]).unwrap();
        let inst = Instance::new(
            network,
            vec![vec![3], vec![4]],
            vec![vec![0.0]; 5],
            vec![vec![0.0]; 5],
            vec![None],
            vec![vec![None]; 5],
            InstanceMeta::default(),
        )
        .unwrap();
        let agg = inst.aggregate_demands();
        assert_eq!(agg[0], vec![7.0]);
        assert_eq!(agg[1], vec![3.0]);
        assert_eq!(agg[2], vec![4.0]);
    }

    #[test]
    fn zero_demand_aggregates_to_zero() {
        let network = SupplyNetwork::new(2, vec![0, 1, 1]).unwrap();
        let inst = Instance::new(
            network,
            vec![vec![0; 3]; 3],
            vec![vec![1.0; 3]; 6],
            vec![vec![1.0; 3]; 6],
            vec![None; 3],
            vec![vec![None; 3]; 6],
            InstanceMeta::default(),
        )
        .unwrap();
        assert!(inst.aggregate_demands().iter().flatten().all(|&d| d == 0.0));
    }

    #[test]
    fn cumulative_demand_ranges() {
        let inst = tiny1();
        assert_eq!(inst.cumulative_demand(0, 0, 1).unwrap(), 20.0);
        assert_eq!(inst.cumulative_demand(0, 1, 1).unwrap(), 15.0);
        assert_eq!(inst.cumulative_demand(0, 0, 0).unwrap(), 5.0);
        assert!(inst.cumulative_demand(0, 1, 2).is_err());
        assert!(inst.cumulative_demand(0, 1, 0).is_err());
    }

    #[test]
    fn network_rejects_unknown_warehouse() {
        assert!(matches!(
            SupplyNetwork::new(2, vec![0, 2]),
            Err(ModelError::UnknownWarehouse { retailer: 1, .. })
        ));
    }

    #[test]
    fn network_children_partition_retailers() {
        let net = SupplyNetwork::new(3, vec![2, 0, 2, 1, 0]).unwrap();
        let mut seen: Vec<usize> = (1..=3).flat_map(|w| net.children(w).to_vec()).collect();
        seen.sort();
        assert_eq!(seen, (4..9).collect::<Vec<_>>());
        assert_eq!(net.parent(4), Some(3));
        assert_eq!(net.parent(2), Some(0));
        assert_eq!(net.parent(0), None);
    }

    #[test]
    fn rejects_negative_costs_and_plant_storage() {
        let network = SupplyNetwork::new(1, vec![0]).unwrap();
        let err = Instance::new(
            network.clone(),
            vec![vec![1]],
            vec![vec![1.0], vec![-1.0], vec![1.0]],
            vec![vec![1.0]; 3],
            vec![None],
            vec![vec![None]; 3],
            InstanceMeta::default(),
        );
        assert!(matches!(err, Err(ModelError::Negative { .. })));
        let err = Instance::new(
            network,
            vec![vec![1]],
            vec![vec![1.0]; 3],
            vec![vec![1.0]; 3],
            vec![None],
            vec![vec![Some(1.0)], vec![None], vec![None]],
            InstanceMeta::default(),
        );
        assert_eq!(err, Err(ModelError::PlantStorageCapacity));
    }

    #[test]
    fn total_cost_examples() {
        let inst = tiny1();
        assert_eq!(total_cost(&inst, &Solution::zero(&inst)), 0.0);

        let mut single = Solution::zero(&inst);
        single.y[0][0] = 1.0;
        assert_eq!(total_cost(&inst, &single), 100.0);

        // Plant and warehouse ship everything in period 0; the warehouse
        // holds 15 units for period 1.
        let y = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let x = vec![vec![20.0, 0.0], vec![20.0, 0.0], vec![5.0, 5.0], vec![0.0, 10.0]];
        let s = vec![vec![0.0, 0.0], vec![15.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]];
        let sol = Solution::new(&inst, y, x, s).unwrap();
        assert!((sol.objective - 120.5).abs() < 1e-12);
    }

    #[test]
    fn echelon_stock_examples() {
        let inst = tiny1();
        let net = inst.network();
        let zero = vec![vec![0.0; 2]; 4];
        assert_eq!(echelon_stock(net, &zero), zero);

        let mut s = zero.clone();
        s[2][0] = 5.0;
        let echelon = echelon_stock(net, &s);
        assert_eq!(echelon[2][0], 5.0);
        assert_eq!(echelon[1][0], 5.0);
        assert_eq!(echelon[0][0], 5.0);
        assert_eq!(echelon[3][0], 0.0);
        assert_eq!(physical_stock(net, &echelon), s);
    }

    #[test]
    fn params_defaults_and_validation() {
        let p = HeuristicParams::default();
        assert_eq!((p.rf_window, p.rf_fix), (5, 3));
        assert_eq!(p.rf_budget_seconds, 60.0);
        assert_eq!(HeuristicParams::with_total_budget(30.0).rf_budget_seconds, 3.0);
        assert!(p.validate().is_ok());
        let bad = HeuristicParams {
            fo_window_min: 2,
            fo_fix_min: 3,
            ..HeuristicParams::default()
        };
        assert!(matches!(bad.validate(), Err(ParamsError::FoWindow { .. })));
        let bad = HeuristicParams {
            rf_fix: 0,
            ..HeuristicParams::default()
        };
        assert_eq!(bad.validate(), Err(ParamsError::Zero("rf_fix")));
    }
}
