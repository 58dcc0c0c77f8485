//! Batch experiments: instance grids, the results table, per-group summaries
//! and deviation data for boxplots.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{work_seconds, MipSolver, ReferenceSolver, SolveControl, SolveStatus};
use crate::formulation::build;
use crate::heuristic::{hybrid_outcome, HeuristicError, HybridOutcome};
use crate::instgen::{generate, read_instance, solution_to_json, Balance, GenSpec, StorageSite};
use crate::model::{FormulationKind, HeuristicParams, Instance, RfStrategy};
use crate::validate::{deviation, improvement, optimality_gap};

/// Two objective values closer than this count as a tie.
pub const TIE_TOL: f64 = 1e-6;

pub const RESULTS_FILE: &str = "results.csv";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// The hybrid heuristic.
    Rffo,
    /// Branch and bound on the echelon formulation.
    MipEs,
    /// Branch and bound on the standard formulation.
    MipStd,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rffo => "rffo",
            Method::MipEs => "mip-es",
            Method::MipStd => "mip-std",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rffo" => Ok(Method::Rffo),
            "mip-es" => Ok(Method::MipEs),
            "mip-std" => Ok(Method::MipStd),
            other => Err(format!("unknown method {other:?} (expected rffo, mip-es or mip-std)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageConfig {
    pub site: StorageSite,
    pub factor: Option<f64>,
}

impl StorageConfig {
    pub const NONE: StorageConfig = StorageConfig {
        site: StorageSite::None,
        factor: None,
    };
}

/// Cartesian grid of generator specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub retailers: Vec<usize>,
    pub warehouses: Vec<usize>,
    pub horizons: Vec<usize>,
    pub balances: Vec<Balance>,
    /// `None` is the uncapacitated plant.
    pub plant_factors: Vec<Option<f64>>,
    pub storage: Vec<StorageConfig>,
    pub replicates: usize,
}

const CAPACITY_FACTORS: [f64; 3] = [1.5, 1.75, 2.0];

fn storage_configs() -> Vec<StorageConfig> {
    let mut configs = vec![StorageConfig::NONE];
    for site in [StorageSite::Warehouses, StorageSite::Retailers] {
        configs.extend(CAPACITY_FACTORS.iter().map(|&f| StorageConfig {
            site,
            factor: Some(f),
        }));
    }
    configs
}

impl Grid {
    /// Desk-scale grid: small networks, every capacity configuration
    /// including the unbounded ones.
    pub fn desk() -> Self {
        Grid {
            retailers: vec![10, 25],
            warehouses: vec![2, 5],
            horizons: vec![6, 15],
            balances: vec![Balance::Balanced],
            plant_factors: std::iter::once(None)
                .chain(CAPACITY_FACTORS.iter().map(|&f| Some(f)))
                .collect(),
            storage: storage_configs(),
            replicates: 1,
        }
    }

    /// The full benchmark grid, with five instances per cell.
    pub fn full() -> Self {
        Grid {
            retailers: vec![50, 100, 200],
            warehouses: vec![5, 10, 15, 20],
            horizons: vec![15, 30],
            balances: vec![Balance::Balanced, Balance::Unbalanced],
            plant_factors: CAPACITY_FACTORS.iter().map(|&f| Some(f)).collect(),
            storage: storage_configs(),
            replicates: 5,
        }
    }

    /// Generator specs in grid order. Replicate `k` uses seed
    /// `seed_base + k` for every capacity configuration, so configurations
    /// of one replicate share demands and costs.
    pub fn specs(&self, seed_base: u64) -> Vec<GenSpec> {
        let mut specs = Vec::new();
        for &r in &self.retailers {
            for &w in self.warehouses.iter().filter(|&&w| w <= r) {
                for &t in &self.horizons {
                    for &balance in &self.balances {
                        for k in 0..self.replicates {
                            for &plant in &self.plant_factors {
                                for storage in &self.storage {
                                    let mut spec = GenSpec::new(r, w, t, seed_base + k as u64);
                                    spec.balance = balance;
                                    spec.plant_capacity_factor = plant;
                                    spec.storage_capacity_site = storage.site;
                                    spec.storage_capacity_factor = storage.factor;
                                    specs.push(spec);
                                }
                            }
                        }
                    }
                }
            }
        }
        specs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSet {
    Files(Vec<PathBuf>),
    Grid(Grid),
    Specs(Vec<GenSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instances: InstanceSet,
    pub methods: Vec<Method>,
    /// Per-run budget.
    pub budget_seconds: f64,
    pub output_dir: PathBuf,
    /// Added to the replicate index to seed grid instances.
    pub seed_base: u64,
    /// Concurrent runs.
    pub workers: usize,
    pub rf_strategy: RfStrategy,
    pub formulation: FormulationKind,
}

impl ExperimentConfig {
    pub fn new(instances: InstanceSet, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            instances,
            methods: vec![Method::Rffo, Method::MipEs],
            budget_seconds: 10.0,
            output_dir: output_dir.into(),
            seed_base: 1,
            workers: 1,
            rf_strategy: RfStrategy::S1,
            formulation: FormulationKind::Echelon,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |msg: &str| Err(BenchError::Config(msg.to_string()));
        if self.methods.is_empty() {
            return fail("at least one method is required");
        }
        if !(self.budget_seconds.is_finite() && self.budget_seconds > 0.0) {
            return fail("budget_seconds must be positive");
        }
        if self.workers == 0 {
            return fail("workers must be at least 1");
        }
        if let InstanceSet::Grid(grid) = &self.instances {
            if grid.replicates == 0 {
                return fail("replicate count must be at least 1");
            }
        }
        Ok(())
    }

    /// Heuristic parameters for one rffo run.
    pub fn heuristic_params(&self) -> HeuristicParams {
        let mut params = HeuristicParams::with_total_budget(self.budget_seconds);
        params.rf_strategy = self.rf_strategy;
        params.formulation = self.formulation;
        params
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance_id: String,
    pub method: Method,
    pub status: String,
    pub best: Option<f64>,
    /// Proven lower bound (MIP methods).
    pub bound: Option<f64>,
    pub gap_pct: Option<f64>,
    /// Budget charged by the run, derived from solver work.
    pub elapsed_s: f64,
    pub rf_best: Option<f64>,
    pub fo_rounds: Option<usize>,
}

impl ResultRow {
    fn failed(instance_id: &str, method: Method, status: &str) -> Self {
        ResultRow {
            instance_id: instance_id.to_string(),
            method,
            status: status.to_string(),
            best: None,
            bound: None,
            gap_pct: None,
            elapsed_s: 0.0,
            rf_best: None,
            fo_rounds: None,
        }
    }
}

fn heuristic_status(error: &HeuristicError) -> &'static str {
    match error {
        HeuristicError::Params(_) => "params-error",
        HeuristicError::ConstructionFailure { .. } => "construction-failure",
        HeuristicError::BudgetExhausted { .. } => "budget-exhausted",
        HeuristicError::Infeasible => "infeasible",
        HeuristicError::Solver { .. } => "solver-error",
        HeuristicError::Extract(_) => "extract-error",
    }
}

/// Results row of a hybrid run.
pub fn rffo_row(instance_id: &str, outcome: &Result<HybridOutcome, HeuristicError>) -> ResultRow {
    match outcome {
        Ok(o) => ResultRow {
            instance_id: instance_id.to_string(),
            method: Method::Rffo,
            status: "feasible".to_string(),
            best: Some(o.solution.objective),
            bound: None,
            gap_pct: None,
            elapsed_s: o.report.charged_seconds,
            rf_best: Some(o.construction.objective),
            fo_rounds: Some(o.report.fo_rounds),
        },
        Err(e) => {
            log::warn!("{instance_id}: rffo failed: {e}");
            ResultRow::failed(instance_id, Method::Rffo, heuristic_status(e))
        }
    }
}

/// Artifacts of one run besides its row.
struct RunArtifacts {
    report: Option<String>,
    solution: Option<String>,
}

/// Runs one method on one instance.
pub fn run_method(
    instance: &Instance,
    method: Method,
    config: &ExperimentConfig,
    solver: &dyn MipSolver,
) -> ResultRow {
    run_with_artifacts(instance, method, config, solver).0
}

fn run_with_artifacts(
    instance: &Instance,
    method: Method,
    config: &ExperimentConfig,
    solver: &dyn MipSolver,
) -> (ResultRow, RunArtifacts) {
    let id = &instance.meta.id;
    let mut artifacts = RunArtifacts {
        report: None,
        solution: None,
    };
    let row = match method {
        Method::Rffo => {
            let outcome = hybrid_outcome(instance, &config.heuristic_params(), solver);
            if let Ok(o) = &outcome {
                artifacts.report = serde_json::to_string_pretty(&o.report).ok();
                artifacts.solution = Some(solution_to_json(instance, &o.solution));
            }
            rffo_row(id, &outcome)
        }
        Method::MipEs | Method::MipStd => {
            let kind = if method == Method::MipEs {
                FormulationKind::Echelon
            } else {
                FormulationKind::Standard
            };
            let model = build(instance, kind);
            let budget = Duration::from_secs_f64(config.budget_seconds);
            let control = SolveControl::new(budget).with_budget(&model, budget, budget);
            let result = solver.solve_mip(&model, &control);
            let best = result.objective();
            let bound = result.dual_bound.is_finite().then_some(result.dual_bound);
            if let Some(inc) = &result.incumbent {
                if let Ok(solution) = crate::formulation::extract_solution(instance, &model, &inc.values) {
                    artifacts.solution = Some(solution_to_json(instance, &solution));
                }
            }
            ResultRow {
                instance_id: id.clone(),
                method,
                status: result.status.as_str().to_string(),
                best,
                bound,
                gap_pct: best.zip(bound).and_then(|(b, lb)| optimality_gap(b, lb).ok()),
                elapsed_s: work_seconds(&model, result.work).as_secs_f64(),
                rf_best: None,
                fo_rounds: None,
            }
        }
    };
    (row, artifacts)
}

/// Instances of a config, or the id and reason of those that failed to load.
fn load_instances(config: &ExperimentConfig) -> Vec<Result<Instance, (String, String)>> {
    match &config.instances {
        InstanceSet::Files(paths) => paths
            .iter()
            .map(|p| read_instance(p).map_err(|e| (p.display().to_string(), e.to_string())))
            .collect(),
        InstanceSet::Grid(grid) => grid
            .specs(config.seed_base)
            .iter()
            .map(|s| generate(s).map_err(|e| (s.id(), e.to_string())))
            .collect(),
        InstanceSet::Specs(specs) => specs
            .iter()
            .map(|s| generate(s).map_err(|e| (s.id(), e.to_string())))
            .collect(),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), BenchError> {
    fs::write(path, text).map_err(io_error(path))
}

/// Runs every method on every instance. Rows are appended to
/// `results.csv` in the output directory as runs complete, so an interrupted
/// batch keeps its finished rows; failed runs become rows with their status.
/// The returned rows are in (instance, method) order.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<Vec<ResultRow>, BenchError> {
    run_benchmark_with(config, &ReferenceSolver)
}

pub fn run_benchmark_with(
    config: &ExperimentConfig,
    solver: &(dyn MipSolver + Sync),
) -> Result<Vec<ResultRow>, BenchError> {
    config.validate()?;
    let out = &config.output_dir;
    for dir in [out.clone(), out.join("instances"), out.join("reports"), out.join("solutions")] {
        fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    }
    write_file(&out.join("config.json"), &serde_json::to_string_pretty(config)?)?;

    let instances = load_instances(config);
    for instance in instances.iter().flatten() {
        if matches!(config.instances, InstanceSet::Grid(_) | InstanceSet::Specs(_)) {
            let path = out.join("instances").join(format!("{}.json", instance.meta.id));
            crate::instgen::write_instance(instance, &path).map_err(|e| BenchError::Config(e.to_string()))?;
        }
    }
    let jobs: Vec<(usize, Method)> = (0..instances.len())
        .flat_map(|k| config.methods.iter().map(move |&m| (k, m)))
        .collect();

    let results_path = out.join(RESULTS_FILE);
    let file = File::create(&results_path).map_err(io_error(&results_path))?;
    let mut writer = csv::Writer::from_writer(file);
    let mut rows: Vec<Option<ResultRow>> = vec![None; jobs.len()];
    let next = AtomicUsize::new(0);
    let (sender, receiver) = mpsc::channel();

    std::thread::scope(|scope| -> Result<(), BenchError> {
        for _ in 0..config.workers.min(jobs.len().max(1)) {
            let sender = sender.clone();
            let (jobs, instances, next) = (&jobs, &instances, &next);
            scope.spawn(move || loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(k, method)) = jobs.get(j) else { break };
                let outcome = match &instances[k] {
                    Ok(instance) => {
                        let (row, artifacts) = run_with_artifacts(instance, method, config, solver);
                        (row, artifacts)
                    }
                    Err((id, reason)) => {
                        log::warn!("{id}: {reason}");
                        (
                            ResultRow::failed(id, method, "input-error"),
                            RunArtifacts {
                                report: None,
                                solution: None,
                            },
                        )
                    }
                };
                if sender.send((j, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(sender);
        for (j, (row, artifacts)) in receiver {
            let stem = format!("{}-{}", row.instance_id, row.method);
            if let Some(report) = artifacts.report {
                write_file(&out.join("reports").join(format!("{stem}.json")), &report)?;
            }
            if let Some(solution) = artifacts.solution {
                write_file(&out.join("solutions").join(format!("{stem}.json")), &solution)?;
            }
            writer.serialize(&row)?;
            writer.flush().map_err(io_error(&results_path))?;
            log::info!("{} {} {} {:?}", row.instance_id, row.method, row.status, row.best);
            rows[j] = Some(row);
        }
        Ok(())
    })?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), BenchError> {
    let file = File::create(path).map_err(io_error(path))?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(io_error(path))?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, BenchError> {
    let file = File::open(path).map_err(io_error(path))?;
    let mut reader = csv::Reader::from_reader(file);
    reader.deserialize().map(|r| r.map_err(BenchError::from)).collect()
}

/// Results as CSV text.
pub fn results_to_csv(rows: &[ResultRow]) -> Result<String, BenchError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn results_from_csv(text: &str) -> Result<Vec<ResultRow>, BenchError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader.deserialize().map(|r| r.map_err(BenchError::from)).collect()
}

/// Parts of a generated instance id: the capacity configuration and the
/// remaining tokens naming the underlying demand and cost data.
fn split_id(id: &str) -> (String, String) {
    let mut base = Vec::new();
    let mut config = Vec::new();
    for token in id.split('-') {
        if token.starts_with('C') || token.starts_with('S') {
            config.push(token);
        } else {
            base.push(token);
        }
    }
    (base.join("-"), config.join("-"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupBy {
    All,
    Retailers,
    Warehouses,
    Horizon,
    Balance,
    PlantCapacityFactor,
    StorageCapacity,
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "all" => GroupBy::All,
            "retailers" => GroupBy::Retailers,
            "warehouses" => GroupBy::Warehouses,
            "horizon" => GroupBy::Horizon,
            "balance" => GroupBy::Balance,
            "plant-capacity-factor" => GroupBy::PlantCapacityFactor,
            "storage-capacity" => GroupBy::StorageCapacity,
            other => return Err(format!("unknown grouping {other:?}")),
        })
    }
}

impl GroupBy {
    /// Group label of a generated instance id; "other" when the id does not
    /// carry the field.
    pub fn key(self, id: &str) -> String {
        let tokens: Vec<&str> = id.split('-').collect();
        let field = |prefix: &str| {
            tokens
                .iter()
                .find(|t| t.starts_with(prefix) && t.len() > prefix.len())
                .map(|t| t[prefix.len()..].to_string())
        };
        let label = match self {
            GroupBy::All => Some("all".to_string()),
            GroupBy::Retailers => field("R").map(|v| format!("R={v}")),
            GroupBy::Warehouses => field("W").map(|v| format!("W={v}")),
            GroupBy::Horizon => field("T").map(|v| format!("T={v}")),
            GroupBy::Balance => tokens
                .iter()
                .find(|t| **t == "b" || **t == "u")
                .map(|t| if *t == "b" { "balanced" } else { "unbalanced" }.to_string()),
            GroupBy::PlantCapacityFactor => field("C").map(|v| format!("C={v}")),
            GroupBy::StorageCapacity => field("S").map(|v| format!("S={v}")),
        };
        label.unwrap_or_else(|| "other".to_string())
    }
}

/// Aggregates of one group, mirroring the columns of the published tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: String,
    /// Instances with a result for both methods.
    pub instances: usize,
    pub avg_best_rffo: Option<f64>,
    pub avg_best_reference: Option<f64>,
    /// Mean optimality gap reported by the reference method.
    pub avg_gap_pct: Option<f64>,
    pub avg_impr_fo_rf: Option<f64>,
    pub avg_impr_rffo_ref: Option<f64>,
    /// Instances where the heuristic is at least as good as the reference.
    pub at_least_as_good: usize,
    /// Instances where the heuristic is strictly better.
    pub strictly_better: usize,
    pub avg_fo_rounds: Option<f64>,
    /// Instances the reference solved to proven optimality.
    pub optimal: usize,
    pub warning: Option<String>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Compares rffo against `reference` per group. Groups without a complete
/// pair yield a row carrying only a warning.
pub fn emit_summary(rows: &[ResultRow], group_by: GroupBy, reference: Method) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<String, BTreeMap<&str, (Option<&ResultRow>, Option<&ResultRow>)>> =
        BTreeMap::new();
    for row in rows {
        let entry = groups
            .entry(group_by.key(&row.instance_id))
            .or_default()
            .entry(row.instance_id.as_str())
            .or_default();
        if row.method == Method::Rffo {
            entry.0 = Some(row);
        } else if row.method == reference {
            entry.1 = Some(row);
        }
    }
    groups
        .into_iter()
        .map(|(group, instances)| {
            let pairs: Vec<(&ResultRow, &ResultRow, f64, f64)> = instances
                .values()
                .filter_map(|&(h, r)| {
                    let (h, r) = (h?, r?);
                    Some((h, r, h.best?, r.best?))
                })
                .collect();
            let mut summary = SummaryRow {
                group: group.clone(),
                instances: pairs.len(),
                avg_best_rffo: None,
                avg_best_reference: None,
                avg_gap_pct: None,
                avg_impr_fo_rf: None,
                avg_impr_rffo_ref: None,
                at_least_as_good: 0,
                strictly_better: 0,
                avg_fo_rounds: None,
                optimal: 0,
                warning: None,
            };
            if pairs.is_empty() {
                log::warn!("group {group}: no instance has results for both rffo and {reference}");
                summary.warning = Some(format!("missing rffo/{reference} pairs"));
                return summary;
            }
            let collect = |f: &dyn Fn(&(&ResultRow, &ResultRow, f64, f64)) -> Option<f64>| {
                pairs.iter().filter_map(f).collect::<Vec<f64>>()
            };
            summary.avg_best_rffo = mean(&collect(&|p| Some(p.2)));
            summary.avg_best_reference = mean(&collect(&|p| Some(p.3)));
            summary.avg_gap_pct = mean(&collect(&|p| p.1.gap_pct));
            summary.avg_impr_fo_rf =
                mean(&collect(&|p| p.0.rf_best.and_then(|rf| improvement(rf, p.2).ok())));
            summary.avg_impr_rffo_ref = mean(&collect(&|p| improvement(p.3, p.2).ok()));
            summary.avg_fo_rounds = mean(&collect(&|p| p.0.fo_rounds.map(|r| r as f64)));
            summary.at_least_as_good = pairs.iter().filter(|p| p.2 <= p.3 + TIE_TOL).count();
            summary.strictly_better = pairs.iter().filter(|p| p.2 < p.3 - TIE_TOL).count();
            summary.optimal = pairs
                .iter()
                .filter(|p| p.1.status == SolveStatus::Optimal.as_str())
                .count();
            summary
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub instance_id: String,
    pub baseline_id: String,
    pub config: String,
    pub deviation: f64,
}

/// Five-number summary of one configuration's deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub config: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationData {
    pub records: Vec<DeviationRecord>,
    pub boxes: Vec<BoxSummary>,
    /// Result ids without a baseline counterpart.
    pub unmatched: Vec<String>,
}

/// Linearly interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn box_summary(config: &str, values: &[f64]) -> Option<BoxSummary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(BoxSummary {
        config: config.to_string(),
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        values: values.to_vec(),
    })
}

/// Deviation of each `method` result from the baseline run of the same
/// underlying instance (same id apart from the capacity configuration),
/// with a five-number summary per configuration.
pub fn emit_deviation_data(results: &[ResultRow], baseline: &[ResultRow], method: Method) -> DeviationData {
    let mut base: BTreeMap<String, (String, f64)> = BTreeMap::new();
    for row in baseline {
        if let Some(best) = row.best {
            let key = split_id(&row.instance_id).0;
            let entry = base.entry(key).or_insert((row.instance_id.clone(), best));
            if best < entry.1 {
                *entry = (row.instance_id.clone(), best);
            }
        }
    }
    let mut records = Vec::new();
    let mut unmatched = Vec::new();
    for row in results.iter().filter(|r| r.method == method) {
        let (key, config) = split_id(&row.instance_id);
        let matched = base
            .get(&key)
            .zip(row.best)
            .and_then(|((id, b), best)| Some((id, deviation(best, *b).ok()?)));
        match matched {
            Some((id, d)) => records.push(DeviationRecord {
                instance_id: row.instance_id.clone(),
                baseline_id: id.clone(),
                config,
                deviation: d,
            }),
            None => unmatched.push(row.instance_id.clone()),
        }
    }
    if !unmatched.is_empty() {
        log::warn!("{} results without a baseline", unmatched.len());
    }
    let mut by_config: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in &records {
        by_config.entry(r.config.as_str()).or_default().push(r.deviation);
    }
    let boxes = by_config
        .iter()
        .filter_map(|(config, values)| box_summary(config, values))
        .collect();
    DeviationData {
        records,
        boxes,
        unmatched,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny1;

    fn row(id: &str, method: Method, best: f64) -> ResultRow {
        ResultRow {
            instance_id: id.to_string(),
            method,
            status: "feasible".to_string(),
            best: Some(best),
            bound: None,
            gap_pct: None,
            elapsed_s: 1.0,
            rf_best: Some(best),
            fo_rounds: Some(2),
        }
    }

    #[test]
    fn desk_grid_shape() {
        let grid = Grid::desk();
        let specs = grid.specs(1);
        assert_eq!(specs.len(), 8 * 4 * 7);
        assert!(specs.iter().all(|s| s.validate().is_ok()));
        let full = Grid::full();
        assert_eq!(full.specs(1).len(), 3 * 4 * 2 * 2 * 5 * 3 * 7);
    }

    #[test]
    fn grid_of_two_instances_and_two_methods_gives_four_rows() {
        let dir = tempfile::tempdir().unwrap();
        let specs = vec![GenSpec::new(2, 1, 2, 1), GenSpec::new(2, 1, 2, 2)];
        let mut config = ExperimentConfig::new(InstanceSet::Specs(specs), dir.path());
        config.methods = vec![Method::Rffo, Method::MipStd];
        config.budget_seconds = 5.0;
        let rows = run_benchmark(&config).unwrap();
        assert_eq!(rows.len(), 4);
        let on_disk = read_results(&dir.path().join(RESULTS_FILE)).unwrap();
        assert_eq!(on_disk.len(), 4);
        assert!(rows.iter().all(|r| r.best.is_some()));
        assert_eq!(rows[0].method, Method::Rffo);
        assert_eq!(rows[1].method, Method::MipStd);
        assert!(dir.path().join("config.json").exists());
    }

    #[test]
    fn rffo_on_tiny_reaches_the_optimum() {
        let config = ExperimentConfig::new(InstanceSet::Files(vec![]), "unused");
        let row = run_method(&tiny1(), Method::Rffo, &config, &ReferenceSolver);
        assert_eq!(row.status, "feasible");
        assert!((row.best.unwrap() - 120.5).abs() < 1e-6);
        let row = run_method(&tiny1(), Method::MipEs, &config, &ReferenceSolver);
        assert_eq!(row.status, "optimal");
        assert_eq!(row.gap_pct, Some(0.0));
    }

    #[test]
    fn unreadable_file_becomes_a_row() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.json");
        let mut config = ExperimentConfig::new(InstanceSet::Files(vec![missing]), dir.path().join("out"));
        config.methods = vec![Method::Rffo];
        let rows = run_benchmark(&config).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].status, "input-error");
    }

    #[test]
    fn csv_round_trip() {
        let mut rows = vec![row("R10-W2-T6-b-C1.50-Sninf-s1", Method::Rffo, 1234.5678)];
        rows.push(ResultRow::failed("x", Method::MipEs, "no-solution"));
        rows[0].gap_pct = Some(0.1 + 0.2);
        let text = results_to_csv(&rows).unwrap();
        assert!(text.starts_with(
            "instance_id,method,status,best,bound,gap_pct,elapsed_s,rf_best,fo_rounds\n"
        ));
        assert_eq!(results_from_csv(&text).unwrap(), rows);
    }

    #[test]
    fn summary_averages_and_counts() {
        let mut rows = vec![
            row("R10-W2-T6-b-C1.50-Sninf-s1", Method::Rffo, 90.0),
            row("R10-W2-T6-b-C1.50-Sninf-s1", Method::MipEs, 100.0),
            row("R10-W2-T6-b-C2.00-Sninf-s1", Method::Rffo, 50.0),
            row("R10-W2-T6-b-C2.00-Sninf-s1", Method::MipEs, 50.0),
        ];
        rows[0].rf_best = Some(100.0);
        let all = emit_summary(&rows, GroupBy::All, Method::MipEs);
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].avg_impr_rffo_ref, Some(5.0));
        assert_eq!(all[0].avg_impr_fo_rf, Some(5.0));
        assert_eq!(all[0].at_least_as_good, 2);
        assert_eq!(all[0].strictly_better, 1);
        let by_c = emit_summary(&rows, GroupBy::PlantCapacityFactor, Method::MipEs);
        let groups: Vec<&str> = by_c.iter().map(|s| s.group.as_str()).collect();
        assert_eq!(groups, ["C=1.50", "C=2.00"]);
    }

    #[test]
    fn identical_methods_tie() {
        let rows: Vec<ResultRow> = (1..=3)
            .flat_map(|s| {
                let id = format!("R10-W2-T6-b-Cinf-Sninf-s{s}");
                [row(&id, Method::Rffo, 10.0 * s as f64), row(&id, Method::MipEs, 10.0 * s as f64)]
            })
            .collect();
        let s = &emit_summary(&rows, GroupBy::All, Method::MipEs)[0];
        assert_eq!(s.avg_impr_rffo_ref, Some(0.0));
        assert_eq!((s.at_least_as_good, s.strictly_better), (3, 0));
    }

    #[test]
    fn missing_pairs_give_warning_row() {
        let rows = vec![row("R10-W2-T6-b-Cinf-Sninf-s1", Method::Rffo, 10.0)];
        let s = &emit_summary(&rows, GroupBy::All, Method::MipEs)[0];
        assert_eq!(s.instances, 0);
        assert!(s.warning.is_some());
    }

    #[test]
    fn summary_regrouping_is_exact() {
        let rows: Vec<ResultRow> = (1..=7)
            .flat_map(|s| {
                let id = format!("R10-W2-T6-b-C1.50-Sninf-s{s}");
                [row(&id, Method::Rffo, 0.1 * s as f64 + 3.0), row(&id, Method::MipEs, 3.3)]
            })
            .collect();
        let text = results_to_csv(&rows).unwrap();
        let again = emit_summary(&results_from_csv(&text).unwrap(), GroupBy::All, Method::MipEs);
        assert_eq!(again, emit_summary(&rows, GroupBy::All, Method::MipEs));
    }

    #[test]
    fn deviation_boxes() {
        let baseline = vec![
            row("R10-W2-T6-b-Cinf-Sninf-s1", Method::Rffo, 100.0),
            row("R10-W2-T6-b-Cinf-Sninf-s2", Method::Rffo, 100.0),
        ];
        let results = vec![
            row("R10-W2-T6-b-C1.50-Sninf-s1", Method::Rffo, 196.0),
            row("R10-W2-T6-b-C2.00-Sninf-s1", Method::Rffo, 100.0),
            row("R10-W2-T6-b-C2.00-Sninf-s2", Method::Rffo, 90.0),
            row("R25-W2-T6-b-C2.00-Sninf-s2", Method::Rffo, 90.0),
        ];
        let data = emit_deviation_data(&results, &baseline, Method::Rffo);
        assert_eq!(data.unmatched, ["R25-W2-T6-b-C2.00-Sninf-s2"]);
        assert_eq!(data.boxes.len(), 2);
        assert_eq!(data.boxes[0].config, "C1.50-Sninf");
        assert_eq!(data.boxes[0].median, 96.0);
        assert_eq!(data.boxes[1].min, -10.0);
        assert_eq!(data.boxes[1].median, -5.0);
        let json = serde_json::to_value(&data.boxes[0]).unwrap();
        for key in ["config", "min", "q1", "median", "q3", "max", "values"] {
            assert!(json.get(key).is_some());
        }
    }

    #[test]
    fn equal_runs_give_degenerate_boxes() {
        let rows = vec![
            row("R10-W2-T6-b-Cinf-Sninf-s1", Method::Rffo, 5.0),
            row("R10-W2-T6-b-Cinf-Sninf-s2", Method::Rffo, 7.0),
        ];
        let data = emit_deviation_data(&rows, &rows, Method::Rffo);
        let b = &data.boxes[0];
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn quartiles_interpolate() {
        let b = box_summary("c", &[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        assert!(box_summary("c", &[]).is_none());
    }
}
