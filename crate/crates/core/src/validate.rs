//! Feasibility checking, the brute-force enumeration oracle and scalar metrics.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{MipSolver, SolveControl, SolveStatus, VarKey};
use crate::formulation::{add_storage_capacity, build_standard, extract_solution, ExtractError};
use crate::model::{Instance, Level, Solution, TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Balance,
    SetupLink,
    PlantCapacity,
    StorageCapacity,
    Nonnegativity,
    Binarity,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Balance => "balance",
            Family::SetupLink => "setup-link",
            Family::PlantCapacity => "plant-capacity",
            Family::StorageCapacity => "storage-capacity",
            Family::Nonnegativity => "nonnegativity",
            Family::Binarity => "binarity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: Family,
    pub facility: usize,
    pub period: usize,
    /// Amount by which the constraint is exceeded.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn has(&self, family: Family) -> bool {
        self.violations.iter().any(|v| v.family == family)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidateError {
    #[error("solution dimensions do not match the instance")]
    Dimension,
    #[error("instance has {cells} setup variables; enumeration is limited to {MAX_ENUM_CELLS}")]
    TooLarge { cells: usize },
    #[error("LP solve failed with status {0}")]
    Solver(&'static str),
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

/// Checks every constraint family of the standard model on a physical plan.
pub fn check_feasibility(instance: &Instance, solution: &Solution) -> Result<FeasibilityReport, ValidateError> {
    let n = instance.num_facilities();
    let horizon = instance.horizon();
    let dims_ok = [&solution.y, &solution.x, &solution.s]
        .iter()
        .all(|m| m.len() == n && m.iter().all(|row| row.len() == horizon));
    if !dims_ok {
        return Err(ValidateError::Dimension);
    }
    let network = instance.network();
    let mut violations = Vec::new();
    let mut flag = |family, facility, period, residual: f64| {
        if residual > TOLERANCE || residual.is_nan() {
            violations.push(Violation {
                family,
                facility,
                period,
                residual,
            });
        }
    };
    for i in 0..n {
        for t in 0..horizon {
            let (x, s, y) = (solution.x[i][t], solution.s[i][t], solution.y[i][t]);
            let previous = if t == 0 { 0.0 } else { solution.s[i][t - 1] };
            let outflow = match network.level(i) {
                Level::Retailer => instance.facility_demand(i, t),
                _ => network.children(i).iter().map(|&j| solution.x[j][t]).sum(),
            };
            flag(Family::Balance, i, t, (previous + x - outflow - s).abs());

            flag(Family::Nonnegativity, i, t, -x);
            flag(Family::Nonnegativity, i, t, -s);
            flag(Family::Binarity, i, t, y.min(1.0 - y).max(y - 1.0).max(-y));

            let big_m = instance.remaining_demand(i, t);
            flag(Family::SetupLink, i, t, x - big_m * y.clamp(0.0, 1.0));
            if x > TOLERANCE && y < 0.5 {
                flag(Family::SetupLink, i, t, x);
            }
            if i == 0 {
                if let Some(cap) = instance.plant_capacity(t) {
                    flag(Family::PlantCapacity, i, t, x - cap);
                }
            }
            if let Some(cap) = instance.storage_capacity(i, t) {
                flag(Family::StorageCapacity, i, t, s - cap.min(big_m));
            }
        }
    }
    let mut seen = BTreeMap::new();
    violations.retain(|v| seen.insert((v.family, v.facility, v.period), ()).is_none());
    Ok(FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
    })
}

pub const MAX_ENUM_CELLS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Enumeration {
    Optimal(Solution),
    Infeasible,
}

impl Enumeration {
    pub fn objective(&self) -> Option<f64> {
        match self {
            Enumeration::Optimal(s) => Some(s.objective),
            Enumeration::Infeasible => None,
        }
    }
}

/// Exact optimum by enumerating every setup pattern and solving the flow LP
/// with all setups fixed. Patterns whose setup cost alone cannot beat the
/// best plan found so far are skipped (holding costs are nonnegative).
pub fn exact_optimum_enumerate(instance: &Instance, solver: &dyn MipSolver) -> Result<Enumeration, ValidateError> {
    let n = instance.num_facilities();
    let horizon = instance.horizon();
    let cells = n * horizon;
    if cells > MAX_ENUM_CELLS {
        return Err(ValidateError::TooLarge { cells });
    }
    let model = add_storage_capacity(build_standard(instance), instance);
    let keys: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..horizon).map(move |t| (i, t))).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for pattern in 0u32..(1u32 << cells) {
        let setup: f64 = keys
            .iter()
            .enumerate()
            .filter(|(b, _)| pattern >> b & 1 == 1)
            .map(|(_, &(i, t))| instance.setup_cost(i, t))
            .sum();
        if best.as_ref().is_some_and(|(z, _)| setup >= *z) {
            continue;
        }
        let fixings = keys
            .iter()
            .enumerate()
            .map(|(b, &(i, t))| (VarKey::y(i, t), pattern >> b & 1 == 1))
            .collect();
        let control = SolveControl::unlimited().with_fixings(fixings);
        let result = solver.solve_lp(&model, &control);
        match result.status {
            SolveStatus::Optimal => {
                let inc = result.incumbent.expect("optimal LP carries a point");
                if best.as_ref().is_none_or(|(z, _)| inc.objective < *z) {
                    best = Some((inc.objective, inc.values));
                }
            }
            SolveStatus::Infeasible => {}
            other => return Err(ValidateError::Solver(other.as_str())),
        }
    }
    match best {
        None => Ok(Enumeration::Infeasible),
        Some((_, values)) => Ok(Enumeration::Optimal(extract_solution(instance, &model, &values)?)),
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("{what} must be positive, got {value}")]
pub struct MetricError {
    pub what: &'static str,
    pub value: f64,
}

fn positive(what: &'static str, value: f64) -> Result<f64, MetricError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(MetricError { what, value })
    }
}

/// 100·(best − bound)/best, clamped at zero when the bound exceeds best.
pub fn optimality_gap(best: f64, bound: f64) -> Result<f64, MetricError> {
    let best = positive("best", best)?;
    Ok((100.0 * (best - bound) / best).max(0.0))
}

/// 100·(reference − candidate)/reference; negative when candidate is worse.
pub fn improvement(reference: f64, candidate: f64) -> Result<f64, MetricError> {
    let reference = positive("reference", reference)?;
    Ok(100.0 * (reference - candidate) / reference)
}

/// 100·(best − baseline)/baseline.
pub fn deviation(best: f64, baseline: f64) -> Result<f64, MetricError> {
    let baseline = positive("baseline", baseline)?;
    Ok(100.0 * (best - baseline) / baseline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ReferenceSolver;
    use crate::model::tests::tiny1;

    fn plan_120_5() -> Solution {
        let inst = tiny1();
        // plant, warehouse, r1, r2
        let y = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let x = vec![vec![20.0, 0.0], vec![20.0, 0.0], vec![5.0, 5.0], vec![0.0, 10.0]];
        let s = vec![vec![0.0, 0.0], vec![15.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]];
        Solution::new(&inst, y, x, s).unwrap()
    }

    #[test]
    fn hand_plan_is_feasible() {
        let sol = plan_120_5();
        assert!((sol.objective - 120.5).abs() < 1e-9);
        let report = check_feasibility(&tiny1(), &sol).unwrap();
        assert!(report.feasible, "{:?}", report.violations);
        let zero = Solution::zero(&tiny1().with_plant_capacity(vec![None; 2]).unwrap());
        assert!(!check_feasibility(&tiny1(), &zero).unwrap().feasible);
    }

    #[test]
    fn missing_setup_is_flagged() {
        let mut sol = plan_120_5();
        sol.y[3][1] = 0.0;
        let report = check_feasibility(&tiny1(), &sol).unwrap();
        assert!(!report.feasible);
        assert!(report.violations.iter().all(|v| v.family == Family::SetupLink));
        assert_eq!((report.violations[0].facility, report.violations[0].period), (3, 1));
    }

    #[test]
    fn balance_and_capacity_flags() {
        let mut sol = plan_120_5();
        sol.s[1][0] = 14.0;
        assert!(check_feasibility(&tiny1(), &sol).unwrap().has(Family::Balance));

        let capped = tiny1().with_plant_capacity(vec![Some(15.0); 2]).unwrap();
        let report = check_feasibility(&capped, &plan_120_5()).unwrap();
        assert!(report.has(Family::PlantCapacity));
        assert!(!report.has(Family::Balance));

        let mut sol = plan_120_5();
        sol.y[2][0] = 0.5;
        assert!(check_feasibility(&tiny1(), &sol).unwrap().has(Family::Binarity));
    }

    #[test]
    fn zero_demand_zero_plan_is_feasible() {
        let inst = tiny1();
        let zero = Instance::new(
            inst.network().clone(),
            vec![vec![0; 2]; 2],
            inst.setup_costs().to_vec(),
            inst.holding_costs().to_vec(),
            vec![None; 2],
            vec![vec![None; 2]; 4],
            Default::default(),
        )
        .unwrap();
        assert!(check_feasibility(&zero, &Solution::zero(&zero)).unwrap().feasible);
        let opt = exact_optimum_enumerate(&zero, &ReferenceSolver).unwrap();
        assert_eq!(opt.objective(), Some(0.0));
    }

    #[test]
    fn oracle_on_tiny() {
        let result = exact_optimum_enumerate(&tiny1(), &ReferenceSolver).unwrap();
        let Enumeration::Optimal(sol) = result else {
            panic!("tiny instance is feasible")
        };
        assert!((sol.objective - 120.5).abs() < 1e-6);
        assert!(check_feasibility(&tiny1(), &sol).unwrap().feasible);

        let capped = tiny1().with_plant_capacity(vec![Some(5.0); 2]).unwrap();
        assert_eq!(
            exact_optimum_enumerate(&capped, &ReferenceSolver).unwrap(),
            Enumeration::Infeasible
        );
    }

    #[test]
    fn oracle_size_guard() {
        let inst = tiny1();
        let wide = Instance::new(
            inst.network().clone(),
            vec![vec![1; 5]; 2],
            vec![vec![1.0; 5]; 4],
            vec![vec![1.0; 5]; 4],
            vec![None; 5],
            vec![vec![None; 5]; 4],
            Default::default(),
        )
        .unwrap();
        assert_eq!(
            exact_optimum_enumerate(&wide, &ReferenceSolver),
            Err(ValidateError::TooLarge { cells: 20 })
        );
    }

    #[test]
    fn metric_examples() {
        assert_eq!(optimality_gap(200.0, 150.0).unwrap(), 25.0);
        assert_eq!(optimality_gap(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(optimality_gap(100.0, 100.5).unwrap(), 0.0);
        assert!((optimality_gap(100.0, 99.999999).unwrap() - 1e-6).abs() < 1e-9);
        assert_eq!(improvement(100.0, 90.0).unwrap(), 10.0);
        assert_eq!(improvement(90.0, 90.0).unwrap(), 0.0);
        assert!((improvement(90.0, 100.0).unwrap() + 100.0 / 9.0).abs() < 1e-9);
        assert_eq!(deviation(196.0, 100.0).unwrap(), 96.0);
        assert_eq!(deviation(99.0, 100.0).unwrap(), -1.0);
        assert!(optimality_gap(0.0, 1.0).is_err());
        assert!(improvement(-1.0, 1.0).is_err());
        assert!(deviation(1.0, 0.0).is_err());
    }
}
