use std::time::{Duration, Instant};

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOptions, SolveOutcome};

use super::{Incumbent, MipModel, MipSolver, Sense, SolveControl, SolveResult, SolveStatus};

const INT_TOL: f64 = 1e-6;
const FEAS_TOL: f64 = 1e-6;
/// Passes of the root round-up heuristic.
const ROUND_UP_PASSES: usize = 8;

/// Bundled solver: simplex relaxations with branch and bound on binaries.
///
/// Node selection dives depth-first until an incumbent exists and then
/// backtracks to the open node with the best bound. Branching picks the most
/// fractional binary, ties broken by the lowest [`VarKey`](super::VarKey).
/// Without a warm start, a round-up pass at the root looks for a first
/// incumbent before branching. Work is counted in simplex pivots.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceSolver;

enum LpOutcome {
    Solved(Box<microlp::Solution>),
    Infeasible,
    Unbounded,
    OutOfTime,
    Failure(String),
}

impl LpOutcome {
    fn from(result: Result<SolveOutcome, microlp::Error>) -> Self {
        match result {
            Ok(SolveOutcome::Solution(sol)) => LpOutcome::Solved(Box::new(sol)),
            Ok(SolveOutcome::Interrupted(_)) => LpOutcome::OutOfTime,
            Err(microlp::Error::Infeasible) => LpOutcome::Infeasible,
            Err(microlp::Error::Unbounded) => LpOutcome::Unbounded,
            Err(e) => LpOutcome::Failure(e.to_string()),
        }
    }

    fn pivots(&self) -> u64 {
        match self {
            LpOutcome::Solved(sol) => sol.stats().lp_iterations.max(1),
            _ => 1,
        }
    }
}

/// Bound changes of a node: (column, fixed value).
type Fixes = Vec<(usize, f64)>;

/// The LP relaxation of a model under a control's fixings.
struct Relaxation<'a> {
    model: &'a MipModel,
    lower: Vec<f64>,
    upper: Vec<f64>,
    columns: Vec<microlp::Variable>,
    problem: Problem,
}

impl<'a> Relaxation<'a> {
    /// `None` when the fixings contradict the variable bounds.
    fn new(model: &'a MipModel, control: &SolveControl) -> Option<Self> {
        let mut lower: Vec<f64> = model.vars().iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = model.vars().iter().map(|v| v.upper).collect();
        for (key, &value) in &control.fixings {
            if let Some(j) = model.var(*key) {
                let v = if value { 1.0 } else { 0.0 };
                if v < lower[j] - FEAS_TOL || v > upper[j] + FEAS_TOL {
                    return None;
                }
                lower[j] = v;
                upper[j] = v;
            }
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return None;
        }
        // Constant rows are either trivially true or infeasible.
        if model
            .rows()
            .iter()
            .any(|r| r.terms.is_empty() && r.violation(&[]) > FEAS_TOL)
        {
            return None;
        }
        let (problem, columns) = Self::build(model, &lower, &upper, &[]);
        Some(Relaxation {
            model,
            lower,
            upper,
            columns,
            problem,
        })
    }

    fn build(
        model: &MipModel,
        lower: &[f64],
        upper: &[f64],
        fixes: &[(usize, f64)],
    ) -> (Problem, Vec<microlp::Variable>) {
        let mut lower = lower.to_vec();
        let mut upper = upper.to_vec();
        for &(j, v) in fixes {
            lower[j] = v;
            upper[j] = v;
        }
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let columns = model
            .vars()
            .iter()
            .enumerate()
            .map(|(j, v)| problem.add_var(v.cost, (lower[j], upper[j])))
            .collect::<Vec<_>>();
        for row in model.rows().iter().filter(|r| !r.terms.is_empty()) {
            let op = match row.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Eq => ComparisonOp::Eq,
                Sense::Ge => ComparisonOp::Ge,
            };
            let terms: Vec<_> = row.terms.iter().map(|&(j, a)| (columns[j], a)).collect();
            problem.add_constraint(terms.as_slice(), op, row.rhs);
        }
        (problem, columns)
    }

    fn run(problem: &Problem, time_limit: Duration) -> (LpOutcome, u64) {
        let mut options = SolveOptions::default();
        options.time_limit = Some(time_limit);
        let outcome = LpOutcome::from(problem.solve_with(options));
        let pivots = outcome.pivots();
        (outcome, pivots)
    }

    /// Solves the relaxation from scratch; returns the outcome and pivots.
    fn solve(&self, time_limit: Duration) -> (LpOutcome, u64) {
        Self::run(&self.problem, time_limit)
    }

    /// Solves from scratch with extra bound fixes. Column indices are shared
    /// with the base relaxation.
    fn solve_fixed(&self, fixes: &[(usize, f64)], time_limit: Duration) -> (LpOutcome, u64) {
        if fixes
            .iter()
            .any(|&(j, v)| v < self.lower[j] - FEAS_TOL || v > self.upper[j] + FEAS_TOL)
        {
            return (LpOutcome::Infeasible, 0);
        }
        let (problem, _) = Self::build(self.model, &self.lower, &self.upper, fixes);
        Self::run(&problem, time_limit)
    }

    fn values(&self, sol: &microlp::Solution) -> Vec<f64> {
        self.columns
            .iter()
            .enumerate()
            .map(|(j, &c)| sol.var_value_raw(c).clamp(self.lower[j], self.upper[j]))
            .collect()
    }

    /// Fixes one more column by a warm re-solve. `all_fixes` lists every fix
    /// of the node including this one. The warm path can report a basic
    /// variable already at the requested value as infeasible; such reports
    /// are rechecked from scratch.
    fn fix(
        &self,
        sol: microlp::Solution,
        column: usize,
        value: f64,
        all_fixes: &[(usize, f64)],
        time_limit: Duration,
    ) -> (LpOutcome, u64) {
        let before = sol.stats().lp_iterations;
        let current = sol.var_value_raw(self.columns[column]);
        match LpOutcome::from(sol.fix_var(self.columns[column], value)) {
            LpOutcome::Solved(s) => {
                let pivots = s.stats().lp_iterations.saturating_sub(before).max(1);
                (LpOutcome::Solved(s), pivots)
            }
            LpOutcome::Infeasible if (current - value).abs() <= INT_TOL => {
                log::debug!("rechecking degenerate fix from scratch");
                let (outcome, pivots) = self.solve_fixed(all_fixes, time_limit);
                (outcome, pivots + 1)
            }
            other => (other, 1),
        }
    }

    /// Re-derives a node's relaxation from the root by applying its fixes.
    fn replay(
        &self,
        root: &microlp::Solution,
        fixes: &[(usize, f64)],
        time_limit: Duration,
    ) -> (LpOutcome, u64) {
        let mut current = root.clone();
        let mut pivots = 0;
        for (k, &(column, value)) in fixes.iter().enumerate() {
            let (outcome, spent) = self.fix(current, column, value, &fixes[..=k], time_limit);
            pivots += spent;
            match outcome {
                LpOutcome::Solved(sol) => current = *sol,
                other => return (other, pivots),
            }
        }
        (LpOutcome::Solved(Box::new(current)), pivots)
    }

    /// Checks a candidate assignment against bounds, rows and integrality.
    fn accepts(&self, values: &[f64], integral: &[usize]) -> bool {
        values.len() == self.model.num_vars()
            && values
                .iter()
                .enumerate()
                .all(|(j, &x)| x >= self.lower[j] - FEAS_TOL && x <= self.upper[j] + FEAS_TOL)
            && self.model.rows().iter().all(|r| r.violation(values) <= FEAS_TOL)
            && integral
                .iter()
                .all(|&j| (values[j] - values[j].round()).abs() <= INT_TOL)
    }
}

struct OpenNode {
    fixes: Fixes,
    bound: f64,
}

fn relaxed_result(status: SolveStatus, start: Instant, work: u64) -> SolveResult {
    SolveResult {
        status,
        incumbent: None,
        dual_bound: match status {
            SolveStatus::Infeasible => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        },
        nodes: 0,
        work,
        elapsed: start.elapsed(),
    }
}

fn failure_status(outcome: &LpOutcome) -> SolveStatus {
    match outcome {
        LpOutcome::Infeasible => SolveStatus::Infeasible,
        LpOutcome::Unbounded => SolveStatus::Unbounded,
        LpOutcome::OutOfTime => SolveStatus::NoSolution,
        LpOutcome::Failure(msg) => {
            log::warn!("LP failure: {msg}");
            SolveStatus::NumericFailure
        }
        LpOutcome::Solved(_) => unreachable!(),
    }
}

impl MipSolver for ReferenceSolver {
    fn solve_lp(&self, model: &MipModel, control: &SolveControl) -> SolveResult {
        let start = Instant::now();
        let Some(relax) = Relaxation::new(model, control) else {
            return relaxed_result(SolveStatus::Infeasible, start, 0);
        };
        match relax.solve(control.time_limit) {
            (LpOutcome::Solved(sol), work) => {
                let values = relax.values(&sol);
                let objective = model.objective_value(&values);
                SolveResult {
                    status: SolveStatus::Optimal,
                    incumbent: Some(Incumbent { values, objective }),
                    dual_bound: objective,
                    nodes: 0,
                    work,
                    elapsed: start.elapsed(),
                }
            }
            (other, work) => relaxed_result(failure_status(&other), start, work),
        }
    }

    fn solve_mip(&self, model: &MipModel, control: &SolveControl) -> SolveResult {
        BranchAndBound::new(model, control).run()
    }
}

/// Why the search stopped early.
enum Halt {
    Limit { frontier: f64 },
    Unbounded,
}

struct BranchAndBound<'a> {
    control: &'a SolveControl,
    start: Instant,
    deadline: Instant,
    relax: Option<Relaxation<'a>>,
    /// Unfixed binary columns inside the integer window, in key order.
    candidates: Vec<usize>,
    incumbent: Option<Incumbent>,
    open: Vec<OpenNode>,
    nodes: u64,
    work: u64,
    /// Lowest bound among nodes discarded by the gap tolerance.
    pruned_floor: f64,
}

impl<'a> BranchAndBound<'a> {
    fn new(model: &'a MipModel, control: &'a SolveControl) -> Self {
        let start = Instant::now();
        let relax = Relaxation::new(model, control);
        let mut candidates: Vec<usize> = match &relax {
            Some(r) => model
                .vars()
                .iter()
                .enumerate()
                .filter(|(j, v)| {
                    v.binary
                        && r.lower[*j] < r.upper[*j]
                        && control.integer_window.contains(v.key.period as usize)
                })
                .map(|(j, _)| j)
                .collect(),
            None => Vec::new(),
        };
        candidates.sort_by_key(|&j| model.vars()[j].key);
        BranchAndBound {
            control,
            start,
            deadline: start + control.time_limit,
            relax,
            candidates,
            incumbent: None,
            open: Vec::new(),
            nodes: 0,
            work: 0,
            pruned_floor: f64::INFINITY,
        }
    }

    fn time_left(&self) -> Duration {
        self.deadline.saturating_duration_since(Instant::now())
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some(inc) => inc.objective - self.control.gap_tolerance * inc.objective.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn out_of_budget(&self) -> bool {
        Instant::now() >= self.deadline
            || self.control.node_limit.is_some_and(|limit| self.nodes >= limit)
            || self.control.work_limit.is_some_and(|limit| self.work >= limit)
    }

    fn is_fractional(value: f64) -> bool {
        (value - value.round()).abs() > INT_TOL
    }

    fn most_fractional(&self, values: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.candidates {
            let frac = (values[j] - values[j].floor()).min(values[j].ceil() - values[j]);
            if frac > INT_TOL && best.is_none_or(|(_, f)| frac > f) {
                best = Some((j, frac));
            }
        }
        best.map(|(j, _)| j)
    }

    fn offer(&mut self, values: Vec<f64>, objective: f64) {
        if self.incumbent.as_ref().is_none_or(|inc| objective < inc.objective - 1e-9) {
            self.incumbent = Some(Incumbent { values, objective });
        }
    }

    /// Rounds the candidates and offers the point if it satisfies the model.
    fn offer_rounded(&mut self, relax: &Relaxation, mut values: Vec<f64>) {
        for &j in &self.candidates {
            values[j] = values[j].round();
        }
        if relax.accepts(&values, &self.candidates) {
            let objective = relax.model.objective_value(&values);
            self.offer(values, objective);
        }
    }

    fn finish(&self, status: SolveStatus, frontier: f64) -> SolveResult {
        let incumbent_obj = self.incumbent.as_ref().map_or(f64::INFINITY, |i| i.objective);
        let open_min = self.open.iter().map(|n| n.bound).fold(frontier, f64::min);
        let dual_bound = match status {
            SolveStatus::Optimal => self.pruned_floor.min(incumbent_obj),
            SolveStatus::Infeasible => f64::INFINITY,
            SolveStatus::Unbounded => f64::NEG_INFINITY,
            _ => open_min.min(self.pruned_floor).min(incumbent_obj),
        };
        SolveResult {
            status,
            incumbent: self.incumbent.clone(),
            dual_bound,
            nodes: self.nodes,
            work: self.work,
            elapsed: self.start.elapsed(),
        }
    }

    fn limit_status(&self) -> SolveStatus {
        if self.incumbent.is_some() {
            SolveStatus::Feasible
        } else {
            SolveStatus::NoSolution
        }
    }

    fn halt(&self, halt: Halt) -> SolveResult {
        match halt {
            Halt::Limit { frontier } => self.finish(self.limit_status(), frontier),
            Halt::Unbounded => self.finish(SolveStatus::Unbounded, f64::NEG_INFINITY),
        }
    }

    /// Turns an integral relaxation into an exact incumbent by pinning the
    /// binaries that drifted from their rounded values.
    fn polish(&mut self, relax: &Relaxation, sol: microlp::Solution, values: Vec<f64>, fixes: &[(usize, f64)]) {
        let drift: Vec<usize> = self
            .candidates
            .iter()
            .copied()
            .filter(|&j| (values[j] - values[j].round()).abs() > 1e-9)
            .collect();
        if drift.is_empty() {
            self.offer_rounded(relax, values);
            return;
        }
        let mut all = fixes.to_vec();
        let mut current = sol;
        for j in drift {
            let v = values[j].round();
            all.push((j, v));
            let (outcome, spent) = relax.fix(current, j, v, &all, self.time_left());
            self.work += spent;
            match outcome {
                LpOutcome::Solved(s) => current = *s,
                _ => return,
            }
        }
        let values = relax.values(&current);
        self.offer_rounded(relax, values);
    }

    /// Offers the root point with every fractional candidate raised to one,
    /// then repeatedly fixes fractional candidates to one and re-solves.
    fn round_up(&mut self, relax: &Relaxation, root_values: &[f64]) {
        let mut ceiled = root_values.to_vec();
        for &j in &self.candidates {
            ceiled[j] = (ceiled[j] - INT_TOL).ceil();
        }
        if relax.accepts(&ceiled, &self.candidates) {
            let objective = relax.model.objective_value(&ceiled);
            self.offer(ceiled, objective);
        }
        let mut fixes: Fixes = Vec::new();
        let mut values = root_values.to_vec();
        for _ in 0..ROUND_UP_PASSES {
            let fractional: Vec<usize> = self
                .candidates
                .iter()
                .copied()
                .filter(|&j| Self::is_fractional(values[j]))
                .collect();
            if fractional.is_empty() {
                self.offer_rounded(relax, values);
                return;
            }
            if self.out_of_budget() {
                return;
            }
            fixes.extend(fractional.into_iter().map(|j| (j, 1.0)));
            let (outcome, spent) = relax.solve_fixed(&fixes, self.time_left());
            self.work += spent;
            match outcome {
                LpOutcome::Solved(sol) => values = relax.values(&sol),
                _ => return,
            }
        }
        if !self.candidates.iter().any(|&j| Self::is_fractional(values[j])) {
            self.offer_rounded(relax, values);
        }
    }

    /// Processes a node and, when it branches, returns the child to dive into.
    fn expand(
        &mut self,
        relax: &Relaxation,
        fixes: Fixes,
        sol: microlp::Solution,
    ) -> Result<Option<(Fixes, microlp::Solution)>, Halt> {
        self.nodes += 1;
        let bound = sol.objective();
        if bound >= self.cutoff() {
            self.pruned_floor = self.pruned_floor.min(bound);
            return Ok(None);
        }
        let values = relax.values(&sol);
        let Some(j) = self.most_fractional(&values) else {
            self.polish(relax, sol, values, &fixes);
            return Ok(None);
        };
        let (first, second) = if values[j] >= 0.5 { (1.0, 0.0) } else { (0.0, 1.0) };
        let mut sibling = fixes.clone();
        sibling.push((j, second));
        self.open.push(OpenNode { fixes: sibling, bound });
        if self.out_of_budget() {
            return Err(Halt::Limit { frontier: bound });
        }
        let mut child = fixes;
        child.push((j, first));
        let (outcome, spent) = relax.fix(sol, j, first, &child, self.time_left());
        self.work += spent;
        match outcome {
            LpOutcome::Solved(s) => Ok(Some((child, *s))),
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::OutOfTime => Err(Halt::Limit { frontier: bound }),
            LpOutcome::Unbounded => Err(Halt::Unbounded),
            LpOutcome::Failure(msg) => {
                log::warn!("LP failure during branching: {msg}");
                Err(Halt::Limit { frontier: bound })
            }
        }
    }

    fn run(mut self) -> SolveResult {
        let Some(relax) = self.relax.take() else {
            return self.finish(SolveStatus::Infeasible, f64::INFINITY);
        };

        if let Some(ws) = &self.control.warm_start {
            if relax.accepts(ws, &self.candidates) {
                self.offer_rounded(&relax, ws.clone());
            } else {
                log::debug!("warm start rejected");
            }
        }

        let (outcome, spent) = relax.solve(self.control.time_limit);
        self.work += spent;
        let root = match outcome {
            LpOutcome::Solved(sol) => *sol,
            LpOutcome::OutOfTime => {
                let status = self.limit_status();
                return self.finish(status, f64::NEG_INFINITY);
            }
            other => {
                let status = failure_status(&other);
                if status == SolveStatus::Infeasible && self.incumbent.is_some() {
                    log::warn!("warm start accepted but relaxation reported infeasible");
                }
                return self.finish(status, f64::INFINITY);
            }
        };

        if self.incumbent.is_none() {
            let values = relax.values(&root);
            if self.most_fractional(&values).is_some() {
                self.round_up(&relax, &values);
            }
        }

        let mut current = Some((Vec::new(), root.clone()));
        loop {
            while let Some((fixes, sol)) = current.take() {
                match self.expand(&relax, fixes, sol) {
                    Ok(next) => current = next,
                    Err(halt) => return self.halt(halt),
                }
            }

            // Backtrack.
            let cutoff = self.cutoff();
            let mut kept = Vec::with_capacity(self.open.len());
            for node in self.open.drain(..) {
                if node.bound >= cutoff {
                    self.pruned_floor = self.pruned_floor.min(node.bound);
                } else {
                    kept.push(node);
                }
            }
            self.open = kept;
            if self.open.is_empty() {
                let status = if self.incumbent.is_some() {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::Infeasible
                };
                return self.finish(status, f64::INFINITY);
            }
            if self.out_of_budget() {
                return self.halt(Halt::Limit { frontier: f64::INFINITY });
            }
            let pick = if self.incumbent.is_none() {
                self.open.len() - 1
            } else {
                // Lowest bound; among equals the most recently created.
                let mut best = 0;
                for (k, node) in self.open.iter().enumerate() {
                    if node.bound <= self.open[best].bound {
                        best = k;
                    }
                }
                best
            };
            let node = self.open.remove(pick);
            let (outcome, spent) = relax.replay(&root, &node.fixes, self.time_left());
            self.work += spent;
            match outcome {
                LpOutcome::Solved(s) => current = Some((node.fixes, *s)),
                LpOutcome::Infeasible => {}
                LpOutcome::OutOfTime => return self.halt(Halt::Limit { frontier: node.bound }),
                LpOutcome::Unbounded => return self.halt(Halt::Unbounded),
                LpOutcome::Failure(msg) => {
                    log::warn!("LP failure while replaying node: {msg}");
                    return self.halt(Halt::Limit { frontier: node.bound });
                }
            }
        }
    }
}
