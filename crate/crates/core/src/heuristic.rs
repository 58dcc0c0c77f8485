//! Relax-and-fix construction, fix-and-optimize improvement with growing
//! neighborhoods, and the hybrid that chains them.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    work_for, work_seconds, IntegerWindow, MipModel, MipSolver, SolveControl, SolveResult, SolveStatus, VarKey,
};
use crate::formulation::{assignment_from_solution, build, extract_solution, ExtractError};
use crate::model::{FormulationKind, HeuristicParams, Instance, ParamsError, RfStrategy, Solution};

/// A candidate replaces the incumbent only if cheaper by more than this.
pub const IMPROVEMENT_EPS: f64 = 1e-6;

/// Below this much remaining time no further subproblem is started.
const MIN_SLICE: Duration = Duration::from_millis(1);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeuristicError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("relax-and-fix subproblem on periods {first}..={last} is infeasible under the fixings")]
    ConstructionFailure { first: usize, last: usize },
    #[error("relax-and-fix subproblem on periods {first}..={last} found no solution within its budget")]
    BudgetExhausted { first: usize, last: usize },
    #[error("the instance is infeasible")]
    Infeasible,
    #[error("solver reported {status} on periods {first}..={last}")]
    Solver {
        status: &'static str,
        first: usize,
        last: usize,
    },
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Rf,
    Fo,
}

/// One line of the subproblem log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemLog {
    pub stage: Stage,
    /// FO round (1-based); 0 for relax-and-fix.
    pub round: usize,
    pub first: usize,
    pub last: usize,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    /// Incumbent cost after this subproblem (FO only).
    pub best: Option<f64>,
    pub nodes: u64,
    pub seconds: f64,
    /// Window skipped because it was already solved to optimality around the
    /// current incumbent.
    pub skipped: bool,
}

fn log_entry(stage: Stage, round: usize, first: usize, last: usize, result: &SolveResult) -> SubproblemLog {
    SubproblemLog {
        stage,
        round,
        first,
        last,
        status: result.status,
        objective: result.objective(),
        best: None,
        nodes: result.nodes,
        seconds: result.elapsed.as_secs_f64(),
        skipped: false,
    }
}

/// Relax-and-fix subproblem: fixings Φ, integrality on `first..=last`, every
/// other unfixed setup relaxed to [0, 1].
pub fn build_rf_subproblem(
    fixings: &BTreeMap<VarKey, bool>,
    first: usize,
    last: usize,
    budget: Duration,
) -> SolveControl {
    SolveControl::new(budget)
        .with_fixings(fixings.clone())
        .with_window(IntegerWindow::Periods { first, last })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfOutcome {
    pub solution: Solution,
    /// Wall-clock time.
    pub elapsed: Duration,
    /// Budget charged, derived from solver work.
    pub charged: Duration,
    pub log: Vec<SubproblemLog>,
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Rolling-horizon construction. Windows of `rf_window` periods advance by
/// `rf_fix`; after each solve the first `rf_fix` periods of the window are
/// fixed (S1: setups at 1 only; S2: every setup). Integrality is kept on all
/// periods up to the window end, so setups left unfixed by S1 stay binary.
///
/// Each window gets an equal share of the budget. When a window ends without
/// a solution and `fallback` is given, that window and every later one are
/// solved on `fallback` instead; the fallback gets one extra share. A window
/// that is solved but overruns its share moves the later windows to
/// `fallback` as well, and `fallback` is used from the start when a share
/// buys fewer pivots than half the rows of `model`.
pub fn relax_and_fix(
    instance: &Instance,
    model: &MipModel,
    fallback: Option<&MipModel>,
    params: &HeuristicParams,
    solver: &dyn MipSolver,
) -> Result<RfOutcome, HeuristicError> {
    params.validate()?;
    let start = Instant::now();
    let horizon = instance.horizon();
    let total = Duration::from_secs_f64(params.rf_budget_seconds);
    let per_sub = total / ceil_div(horizon, params.rf_fix) as u32;
    let wall_cap = if fallback.is_some() { total + per_sub } else { total };
    let mut fixings = BTreeMap::new();
    let mut log = Vec::new();
    let mut charged = Duration::ZERO;
    let mut active = model;
    let mut fallback = fallback;
    if work_for(model, per_sub) < model.num_rows() as u64 / 2 {
        if let Some(next) = fallback.take() {
            log::info!("relax-and-fix share too small for the model; using the fallback model");
            active = next;
        }
    }
    let mut alpha = 0;
    loop {
        let beta = (alpha + params.rf_window - 1).min(horizon - 1);
        let wall_left = wall_cap.saturating_sub(start.elapsed());
        let control =
            build_rf_subproblem(&fixings, 0, beta, per_sub).with_budget(active, per_sub, wall_left);
        let result = solver.solve_mip(active, &control);
        let spent = work_seconds(active, result.work);
        charged += spent;
        let mut entry = log_entry(Stage::Rf, 0, alpha, beta, &result);
        entry.best = result.objective();
        log.push(entry);
        let incumbent = match (result.status, result.incumbent) {
            (_, Some(inc)) => inc,
            (SolveStatus::NoSolution, None) if fallback.is_some() => {
                log::info!("relax-and-fix window {alpha}..={beta} switches to the fallback model");
                active = fallback.take().expect("fallback present");
                continue;
            }
            (SolveStatus::Infeasible, None) if fixings.is_empty() => {
                return Err(HeuristicError::Infeasible)
            }
            (SolveStatus::Infeasible, None) if params.rf_strategy == RfStrategy::S2 => {
                return Err(HeuristicError::ConstructionFailure { first: alpha, last: beta })
            }
            (SolveStatus::Infeasible, None) => return Err(HeuristicError::Infeasible),
            (SolveStatus::NoSolution, None) => {
                return Err(HeuristicError::BudgetExhausted { first: alpha, last: beta })
            }
            (status, None) => {
                return Err(HeuristicError::Solver {
                    status: status.as_str(),
                    first: alpha,
                    last: beta,
                })
            }
        };
        if beta == horizon - 1 {
            let solution = extract_solution(instance, active, &incumbent.values)?;
            return Ok(RfOutcome {
                solution,
                elapsed: start.elapsed(),
                charged,
                log,
            });
        }
        let fix_end = (alpha + params.rf_fix).min(beta + 1);
        for t in alpha..fix_end {
            for i in 0..instance.num_facilities() {
                let key = VarKey::y(i, t);
                let column = active.var(key).expect("setup variable present");
                let on = incumbent.values[column] > 0.5;
                if on || params.rf_strategy == RfStrategy::S2 {
                    fixings.insert(key, on);
                }
            }
        }
        if spent > per_sub {
            if let Some(next) = fallback.take() {
                log::info!("relax-and-fix overran its share on {alpha}..={beta}; later windows use the fallback model");
                active = next;
            }
        }
        alpha = fix_end;
    }
}

/// Fix-and-optimize subproblem: setups outside `first..=last` pinned to the
/// incumbent, setups inside kept binary, warm start at the incumbent.
pub fn build_fo_subproblem(
    instance: &Instance,
    model: &MipModel,
    incumbent: &Solution,
    first: usize,
    last: usize,
    budget: Duration,
) -> SolveControl {
    let fixings = (0..instance.num_facilities())
        .flat_map(|i| (0..instance.horizon()).map(move |t| (i, t)))
        .filter(|&(_, t)| t < first || t > last)
        .map(|(i, t)| (VarKey::y(i, t), incumbent.y[i][t] > 0.5))
        .collect();
    SolveControl::new(budget)
        .with_fixings(fixings)
        .with_window(IntegerWindow::Periods { first, last })
        .with_warm_start(assignment_from_solution(instance, model, incumbent))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoOutcome {
    pub solution: Solution,
    pub rounds: usize,
    /// Incumbent cost after every subproblem, starting with the input cost.
    pub trajectory: Vec<f64>,
    /// Wall-clock time.
    pub elapsed: Duration,
    /// Budget charged, derived from solver work.
    pub charged: Duration,
    pub log: Vec<SubproblemLog>,
}

/// Window sequence of one round.
fn round_windows(horizon: usize, window: usize, fix: usize) -> Vec<(usize, usize)> {
    let mut windows = Vec::new();
    let mut alpha = 0;
    loop {
        let beta = (alpha + window - 1).min(horizon - 1);
        windows.push((alpha, beta));
        if beta == horizon - 1 {
            return windows;
        }
        alpha = (alpha + fix).min(horizon - 1);
    }
}

/// Improvement by sweeping windows over the horizon. A round that fails to
/// improve grows the window by `fo_window_step` and the step by
/// `fo_fix_step`; once the window spans the horizon the last solve gets all
/// remaining budget. Windows already solved to proven optimality around the
/// current incumbent are skipped, and the search ends when a non-improving
/// round leaves only such windows.
pub fn fix_and_optimize(
    instance: &Instance,
    model: &MipModel,
    initial: Solution,
    params: &HeuristicParams,
    budget: Duration,
    solver: &dyn MipSolver,
) -> Result<FoOutcome, HeuristicError> {
    fix_and_optimize_within(instance, model, initial, params, budget, budget, solver)
}

/// As [`fix_and_optimize`], with the charged budget and the wall-clock cap
/// given separately.
fn fix_and_optimize_within(
    instance: &Instance,
    model: &MipModel,
    initial: Solution,
    params: &HeuristicParams,
    budget: Duration,
    wall_cap: Duration,
    solver: &dyn MipSolver,
) -> Result<FoOutcome, HeuristicError> {
    params.validate()?;
    let start = Instant::now();
    let horizon = instance.horizon();
    let mut charged = Duration::ZERO;
    let wall_left = || wall_cap.saturating_sub(start.elapsed());
    let mut sub_budget =
        budget / (params.fo_min_rounds * ceil_div(horizon, params.fo_fix_min)) as u32;
    let (mut window, mut fix) = (params.fo_window_min, params.fo_fix_min);
    let mut best = initial;
    let mut trajectory = vec![best.objective];
    let mut log = Vec::new();
    let mut proven: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut rounds = 0;

    'search: loop {
        let windows = round_windows(horizon, window, fix);
        if rounds > 0 && windows.iter().all(|w| proven.contains(w)) {
            break;
        }
        if budget.saturating_sub(charged) < MIN_SLICE || wall_left() < MIN_SLICE {
            break;
        }
        rounds += 1;
        let round_start = best.objective;
        for (alpha, beta) in windows {
            if proven.contains(&(alpha, beta)) {
                log.push(SubproblemLog {
                    stage: Stage::Fo,
                    round: rounds,
                    first: alpha,
                    last: beta,
                    status: SolveStatus::Optimal,
                    objective: Some(best.objective),
                    best: Some(best.objective),
                    nodes: 0,
                    seconds: 0.0,
                    skipped: true,
                });
                continue;
            }
            let left = budget.saturating_sub(charged);
            let wall = wall_left();
            if left < MIN_SLICE || wall < MIN_SLICE {
                break 'search;
            }
            let slice = if window < horizon { sub_budget.min(left) } else { left };
            let control = build_fo_subproblem(instance, model, &best, alpha, beta, slice)
                .with_budget(model, slice, wall);
            let result = solver.solve_mip(model, &control);
            charged += work_seconds(model, result.work);
            let mut entry = log_entry(Stage::Fo, rounds, alpha, beta, &result);
            if let Some(inc) = &result.incumbent {
                let candidate = extract_solution(instance, model, &inc.values)?;
                if candidate.objective < best.objective - IMPROVEMENT_EPS {
                    best = candidate;
                    proven.clear();
                }
            }
            if result.status == SolveStatus::Optimal {
                proven.insert((alpha, beta));
            }
            entry.best = Some(best.objective);
            log.push(entry);
            trajectory.push(best.objective);
        }
        if best.objective < round_start - IMPROVEMENT_EPS {
            continue;
        }
        if window >= horizon {
            break;
        }
        window += params.fo_window_step;
        fix += params.fo_fix_step;
        if window >= horizon {
            sub_budget = budget.saturating_sub(charged);
        }
    }
    Ok(FoOutcome {
        solution: best,
        rounds,
        trajectory,
        elapsed: start.elapsed(),
        charged,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub instance_id: String,
    pub params: HeuristicParams,
    pub rf_cost: f64,
    pub final_cost: f64,
    pub rf_seconds: f64,
    pub fo_seconds: f64,
    pub fo_rounds: usize,
    /// Budget charged by both stages; reproducible, unlike wall-clock time.
    pub charged_seconds: f64,
    pub trajectory: Vec<f64>,
    pub subproblem_log: Vec<SubproblemLog>,
}

/// Result of a hybrid run with the constructed solution kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridOutcome {
    pub construction: Solution,
    pub solution: Solution,
    pub report: RunReport,
}

/// Relax-and-fix within its share of the budget, then fix-and-optimize with
/// whatever is left. Budgets are charged by solver work so that runs are
/// reproducible; wall-clock time only acts as a cap. Relax-and-fix on the
/// echelon formulation falls back to the standard one when a window runs out
/// of budget.
pub fn hybrid(
    instance: &Instance,
    params: &HeuristicParams,
    solver: &dyn MipSolver,
) -> Result<(Solution, RunReport), HeuristicError> {
    hybrid_outcome(instance, params, solver).map(|o| (o.solution, o.report))
}

/// As [`hybrid`], also returning the relax-and-fix solution.
pub fn hybrid_outcome(
    instance: &Instance,
    params: &HeuristicParams,
    solver: &dyn MipSolver,
) -> Result<HybridOutcome, HeuristicError> {
    params.validate()?;
    let start = Instant::now();
    let model = build(instance, params.formulation);
    let fallback = match params.formulation {
        FormulationKind::Echelon => Some(build(instance, FormulationKind::Standard)),
        FormulationKind::Standard => None,
    };
    let rf = relax_and_fix(instance, &model, fallback.as_ref(), params, solver)?;
    let total = Duration::from_secs_f64(params.total_budget_seconds);
    let fo_budget = total.saturating_sub(rf.charged);
    let fo_wall = total.saturating_sub(start.elapsed());
    let construction = rf.solution.clone();
    let fo =
        fix_and_optimize_within(instance, &model, rf.solution, params, fo_budget, fo_wall, solver)?;
    let mut subproblem_log = rf.log;
    subproblem_log.extend(fo.log);
    let report = RunReport {
        instance_id: instance.meta.id.clone(),
        params: params.clone(),
        rf_cost: construction.objective,
        final_cost: fo.solution.objective,
        rf_seconds: rf.elapsed.as_secs_f64(),
        fo_seconds: fo.elapsed.as_secs_f64(),
        fo_rounds: fo.rounds,
        charged_seconds: (rf.charged + fo.charged).as_secs_f64(),
        trajectory: fo.trajectory,
        subproblem_log,
    };
    Ok(HybridOutcome {
        construction,
        solution: fo.solution,
        report,
    })
}
