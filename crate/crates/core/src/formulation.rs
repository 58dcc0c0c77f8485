//! MIP formulations of the lot-sizing problem and the mapping between model
//! assignments and physical plans.

use thiserror::Error;

use crate::engine::{MipModel, Role, Sense, VarKey};
use crate::model::{
    echelon_holding_cost, echelon_stock, physical_stock, FormulationKind, Instance, Level,
    ModelError, Solution,
};

/// Reconstructed stock may dip below zero by at most this much.
const EXTRACT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error("assignment has {found} values, model has {expected} variables")]
    Length { expected: usize, found: usize },
    #[error("reconstructed inventory of facility {facility} in period {period} is {value}")]
    NegativeStock {
        facility: usize,
        period: usize,
        value: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn add_grid(
    model: &mut MipModel,
    instance: &Instance,
    role: Role,
    binary: bool,
    cost: impl Fn(usize, usize) -> f64,
) {
    for i in 0..instance.num_facilities() {
        for t in 0..instance.horizon() {
            let upper = if binary { 1.0 } else { f64::INFINITY };
            model.add_var(VarKey::new(role, i, t), 0.0, upper, binary, cost(i, t));
        }
    }
}

fn col(model: &MipModel, role: Role, facility: usize, period: usize) -> usize {
    model
        .var(VarKey::new(role, facility, period))
        .expect("formulation variable present")
}

/// Big-M of the setup-linking row of `facility` in `period`.
fn link_coefficient(instance: &Instance, facility: usize, period: usize) -> f64 {
    let remaining = instance.remaining_demand(facility, period);
    match (facility, instance.plant_capacity(period)) {
        (0, Some(cap)) => cap.min(remaining),
        _ => remaining,
    }
}

/// Setup-linking rows x^i_t ≤ M^i_t y^i_t, with the plant's capacity folded in.
fn add_linking_rows(model: &mut MipModel, instance: &Instance) {
    for i in 0..instance.num_facilities() {
        for t in 0..instance.horizon() {
            let m = link_coefficient(instance, i, t);
            let x = col(model, Role::X, i, t);
            let y = col(model, Role::Y, i, t);
            model.add_row(format!("link_{i}_{t}"), vec![(x, 1.0), (y, -m)], Sense::Le, 0.0);
        }
    }
}

/// Builds the standard formulation in (x, s, y): objective, inventory
/// balances, setup-linking rows, bounds and binaries.
pub fn build_standard(instance: &Instance) -> MipModel {
    let mut model = MipModel::new();
    add_grid(&mut model, instance, Role::X, false, |_, _| 0.0);
    add_grid(&mut model, instance, Role::S, false, |i, t| instance.holding_cost(i, t));
    add_grid(&mut model, instance, Role::Y, true, |i, t| instance.setup_cost(i, t));
    let network = instance.network();
    for i in 0..instance.num_facilities() {
        for t in 0..instance.horizon() {
            let mut terms = vec![(col(&model, Role::X, i, t), 1.0), (col(&model, Role::S, i, t), -1.0)];
            if t > 0 {
                terms.push((col(&model, Role::S, i, t - 1), 1.0));
            }
            let rhs = match network.level(i) {
                Level::Retailer => instance.facility_demand(i, t),
                _ => {
                    for &j in network.children(i) {
                        terms.push((col(&model, Role::X, j, t), -1.0));
                    }
                    0.0
                }
            };
            model.add_row(format!("bal_{i}_{t}"), terms, Sense::Eq, rhs);
        }
    }
    add_linking_rows(&mut model, instance);
    model
}

/// Storage bound min{Ĉ^i_t, d^i_{t|T|}} of a capacitated facility.
fn storage_limit(instance: &Instance, facility: usize, period: usize) -> Option<f64> {
    instance
        .storage_capacity(facility, period)
        .map(|cap| cap.min(instance.remaining_demand(facility, period)))
}

/// Tightens the inventory bounds of capacitated facilities in a standard
/// model. Adds no rows.
pub fn add_storage_capacity(mut model: MipModel, instance: &Instance) -> MipModel {
    for i in 0..instance.num_facilities() {
        for t in 0..instance.horizon() {
            if let Some(limit) = storage_limit(instance, i, t) {
                let s = col(&model, Role::S, i, t);
                model.tighten_upper(s, limit);
            }
        }
    }
    model
}

/// Builds the echelon-stock formulation in (x, I, y), including the
/// (l,S)-style rows for every facility and every pair t ≤ l, and the
/// storage limits when the instance has them.
pub fn build_echelon(instance: &Instance) -> MipModel {
    let horizon = instance.horizon();
    let network = instance.network();
    let mut model = MipModel::new();
    add_grid(&mut model, instance, Role::X, false, |_, _| 0.0);
    add_grid(&mut model, instance, Role::I, false, |i, t| echelon_holding_cost(instance, i, t));
    add_grid(&mut model, instance, Role::Y, true, |i, t| instance.setup_cost(i, t));

    for i in 0..instance.num_facilities() {
        for t in 0..horizon {
            let mut terms = vec![(col(&model, Role::X, i, t), 1.0), (col(&model, Role::I, i, t), -1.0)];
            if t > 0 {
                terms.push((col(&model, Role::I, i, t - 1), 1.0));
            }
            model.add_row(format!("ebal_{i}_{t}"), terms, Sense::Eq, instance.facility_demand(i, t));
        }
    }
    for i in 0..instance.num_facilities() {
        if network.level(i) == Level::Retailer {
            continue;
        }
        for t in 0..horizon {
            let mut terms = vec![(col(&model, Role::I, i, t), 1.0)];
            terms.extend(network.children(i).iter().map(|&j| (col(&model, Role::I, j, t), -1.0)));
            model.add_row(format!("nest_{i}_{t}"), terms, Sense::Ge, 0.0);
        }
    }
    // I_{t-1} + Σ_{u=t}^{l} d_{ul} y_u ≥ d_{tl}
    for i in 0..instance.num_facilities() {
        let d = &instance.aggregate_demands()[i];
        for t in 0..horizon {
            for l in t..horizon {
                let mut terms = Vec::with_capacity(l - t + 2);
                if t > 0 {
                    terms.push((col(&model, Role::I, i, t - 1), 1.0));
                }
                let mut tail = 0.0;
                let mut coeffs = vec![0.0; l - t + 1];
                for u in (t..=l).rev() {
                    tail += d[u];
                    coeffs[u - t] = tail;
                }
                for u in t..=l {
                    terms.push((col(&model, Role::Y, i, u), coeffs[u - t]));
                }
                model.add_row(format!("ls_{i}_{t}_{l}"), terms, Sense::Ge, tail);
            }
        }
    }
    add_linking_rows(&mut model, instance);

    for i in 0..instance.num_facilities() {
        for t in 0..horizon {
            let Some(limit) = storage_limit(instance, i, t) else {
                continue;
            };
            let own = col(&model, Role::I, i, t);
            if network.children(i).is_empty() {
                model.tighten_upper(own, limit);
            } else {
                let mut terms = vec![(own, 1.0)];
                terms.extend(network.children(i).iter().map(|&j| (col(&model, Role::I, j, t), -1.0)));
                model.add_row(format!("cap_{i}_{t}"), terms, Sense::Le, limit);
            }
        }
    }
    model
}

/// Builds the requested formulation, including storage limits.
pub fn build(instance: &Instance, kind: FormulationKind) -> MipModel {
    match kind {
        FormulationKind::Standard => add_storage_capacity(build_standard(instance), instance),
        FormulationKind::Echelon => build_echelon(instance),
    }
}

/// Whether a model is expressed in echelon variables.
pub fn kind_of(model: &MipModel) -> FormulationKind {
    if model.var(VarKey::new(Role::I, 0, 0)).is_some() {
        FormulationKind::Echelon
    } else {
        FormulationKind::Standard
    }
}

fn grid(model: &MipModel, instance: &Instance, role: Role, values: &[f64]) -> Vec<Vec<f64>> {
    (0..instance.num_facilities())
        .map(|i| (0..instance.horizon()).map(|t| values[col(model, role, i, t)]).collect())
        .collect()
}

/// Converts a model assignment into a physical plan. Echelon stocks are
/// mapped back through s^i_t = I^i_t − Σ_{j∈δ(i)} I^j_t; tiny negative
/// values from solver round-off are clamped to zero.
pub fn extract_solution(
    instance: &Instance,
    model: &MipModel,
    values: &[f64],
) -> Result<Solution, ExtractError> {
    if values.len() != model.num_vars() {
        return Err(ExtractError::Length {
            expected: model.num_vars(),
            found: values.len(),
        });
    }
    let y = grid(model, instance, Role::Y, values);
    let clean = |m: Vec<Vec<f64>>| -> Result<Vec<Vec<f64>>, ExtractError> {
        m.into_iter()
            .enumerate()
            .map(|(facility, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(period, v)| {
                        if v < -EXTRACT_TOL {
                            Err(ExtractError::NegativeStock {
                                facility,
                                period,
                                value: v,
                            })
                        } else {
                            Ok(v.max(0.0))
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let x = clean(grid(model, instance, Role::X, values))?;
    let s = match kind_of(model) {
        FormulationKind::Standard => grid(model, instance, Role::S, values),
        FormulationKind::Echelon => {
            physical_stock(instance.network(), &grid(model, instance, Role::I, values))
        }
    };
    let s = clean(s)?;
    Ok(Solution::new(instance, y, x, s)?)
}

/// Maps a physical plan onto a model's columns (for warm starts).
pub fn assignment_from_solution(instance: &Instance, model: &MipModel, solution: &Solution) -> Vec<f64> {
    let mut values = vec![0.0; model.num_vars()];
    let stock = match kind_of(model) {
        FormulationKind::Standard => solution.s.clone(),
        FormulationKind::Echelon => echelon_stock(instance.network(), &solution.s),
    };
    let stock_role = match kind_of(model) {
        FormulationKind::Standard => Role::S,
        FormulationKind::Echelon => Role::I,
    };
    for i in 0..instance.num_facilities() {
        for t in 0..instance.horizon() {
            values[col(model, Role::X, i, t)] = solution.x[i][t];
            values[col(model, Role::Y, i, t)] = solution.y[i][t];
            values[col(model, stock_role, i, t)] = stock[i][t];
        }
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{MipSolver, ReferenceSolver, SolveControl, SolveStatus};
    use crate::model::tests::tiny1;
    use crate::model::{InstanceMeta, SupplyNetwork};

    #[test]
    fn standard_counts_on_tiny() {
        let inst = tiny1();
        let m = build_standard(&inst);
        assert_eq!(m.num_vars(), 24);
        assert_eq!(m.num_vars(), 3 * inst.num_facilities() * inst.horizon());
        assert_eq!(m.count_rows("bal_"), 8);
        assert_eq!(m.count_rows("link_"), 8);
        assert_eq!(m.num_rows(), 16);
        assert_eq!(m.vars().iter().filter(|v| v.binary).count(), 8);
    }

    #[test]
    fn plant_link_uses_remaining_demand_without_capacity() {
        let inst = tiny1();
        let m = build_standard(&inst);
        let row = m.rows().iter().find(|r| r.name == "link_0_0").unwrap();
        let y = m.var(VarKey::y(0, 0)).unwrap();
        assert_eq!(row.terms.iter().find(|t| t.0 == y).unwrap().1, -20.0);

        let capped = inst.with_plant_capacity(vec![Some(12.0); 2]).unwrap();
        let m = build_standard(&capped);
        let row = m.rows().iter().find(|r| r.name == "link_0_1").unwrap();
        let y = m.var(VarKey::y(0, 1)).unwrap();
        assert_eq!(row.terms.iter().find(|t| t.0 == y).unwrap().1, -12.0);
    }

    #[test]
    fn storage_bounds() {
        let inst = tiny1();
        // Retailer 0 (facility 2): remaining demand 10 from period 0.
        let mut caps = vec![vec![None; 2]; 4];
        caps[2] = vec![Some(40.0), Some(40.0)];
        caps[3] = vec![Some(0.0), Some(0.0)];
        let capped = inst.with_storage_capacity(caps).unwrap();
        let base = build_standard(&capped);
        let m = add_storage_capacity(base.clone(), &capped);
        assert_eq!(m.num_rows(), base.num_rows());
        let s = |i, t| m.vars()[m.var(VarKey::new(Role::S, i, t)).unwrap()].upper;
        assert_eq!(s(2, 0), 10.0);
        assert_eq!(s(2, 1), 5.0);
        assert_eq!(s(3, 0), 0.0);
        assert_eq!(s(1, 0), f64::INFINITY);
    }

    #[test]
    fn echelon_row_counts() {
        let inst = tiny1();
        let m = build_echelon(&inst);
        assert_eq!(m.num_vars(), 24);
        assert_eq!(m.count_rows("ls_"), 12);
        assert_eq!(m.count_rows("ebal_"), 8);
        assert_eq!(m.count_rows("nest_"), 4);
        assert_eq!(m.count_rows("link_"), 8);
    }

    #[test]
    fn single_period_ls_row() {
        let inst = tiny1();
        let m = build_echelon(&inst);
        // Retailer facility 3 in period 1: I_0 + d_1 y_1 ≥ d_1 with d_1 = 10.
        let row = m.rows().iter().find(|r| r.name == "ls_3_1_1").unwrap();
        assert_eq!(row.rhs, 10.0);
        let i0 = m.var(VarKey::new(Role::I, 3, 0)).unwrap();
        let y1 = m.var(VarKey::y(3, 1)).unwrap();
        let mut terms = row.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut expected = vec![(i0, 1.0), (y1, 10.0)];
        expected.sort_by_key(|t| t.0);
        assert_eq!(terms, expected);
    }

    #[test]
    fn zero_demand_model_is_free() {
        let network = SupplyNetwork::new(1, vec![0, 0]).unwrap();
        let inst = Instance::new(
            network,
            vec![vec![0; 2]; 2],
            vec![vec![5.0; 2]; 4],
            vec![vec![1.0; 2]; 4],
            vec![None; 2],
            vec![vec![None; 2]; 4],
            InstanceMeta::default(),
        )
        .unwrap();
        for m in [build_standard(&inst), build_echelon(&inst)] {
            let res = ReferenceSolver.solve_mip(&m, &SolveControl::unlimited());
            assert_eq!(res.status, SolveStatus::Optimal);
            let sol = extract_solution(&inst, &m, &res.incumbent.unwrap().values).unwrap();
            assert_eq!(sol.objective, 0.0);
            assert_eq!(sol.num_setups(), 0);
        }
    }

    #[test]
    fn both_formulations_reach_tiny_optimum() {
        let inst = tiny1();
        for m in [build_standard(&inst), build_echelon(&inst)] {
            let res = ReferenceSolver.solve_mip(&m, &SolveControl::unlimited());
            assert_eq!(res.status, SolveStatus::Optimal);
            let inc = res.incumbent.unwrap();
            assert!((inc.objective - 120.5).abs() < 1e-6, "{}", inc.objective);
            let sol = extract_solution(&inst, &m, &inc.values).unwrap();
            assert!((sol.objective - inc.objective).abs() < 1e-5);
        }
    }

    #[test]
    fn extract_echelon_zero_and_passthrough() {
        let inst = tiny1();
        let m = build_echelon(&inst);
        let values = vec![0.0; m.num_vars()];
        let sol = extract_solution(&inst, &m, &values).unwrap();
        assert!(sol.s.iter().flatten().all(|&v| v == 0.0));

        let std = build_standard(&inst);
        let mut values = vec![0.0; std.num_vars()];
        values[std.var(VarKey::new(Role::S, 1, 0)).unwrap()] = 15.0;
        values[std.var(VarKey::new(Role::X, 2, 1)).unwrap()] = 5.0;
        let sol = extract_solution(&inst, &std, &values).unwrap();
        assert_eq!(sol.s[1][0], 15.0);
        assert_eq!(sol.x[2][1], 5.0);
    }

    #[test]
    fn extract_rejects_nesting_violation() {
        let inst = tiny1();
        let m = build_echelon(&inst);
        let mut values = vec![0.0; m.num_vars()];
        // Retailer echelon 5 while its warehouse echelon is 0.
        values[m.var(VarKey::new(Role::I, 2, 0)).unwrap()] = 5.0;
        assert!(matches!(
            extract_solution(&inst, &m, &values),
            Err(ExtractError::NegativeStock { facility: 1, period: 0, .. })
        ));
    }

    #[test]
    fn warm_start_round_trip() {
        let inst = tiny1();
        for m in [build_standard(&inst), build_echelon(&inst)] {
            let res = ReferenceSolver.solve_mip(&m, &SolveControl::unlimited());
            let sol = extract_solution(&inst, &m, &res.incumbent.unwrap().values).unwrap();
            let values = assignment_from_solution(&inst, &m, &sol);
            assert!(m.max_violation(&values) < 1e-6);
            assert!((m.objective_value(&values) - sol.objective).abs() < 1e-6);
        }
    }
}
