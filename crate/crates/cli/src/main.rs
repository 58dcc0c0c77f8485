use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lotsizing::bench::{
    emit_deviation_data, emit_summary, read_results, run_benchmark, run_method, ExperimentConfig, Grid,
    GroupBy, InstanceSet, Method,
};
use lotsizing::engine::lp_format::export_model_text;
use lotsizing::engine::ReferenceSolver;
use lotsizing::formulation::build;
use lotsizing::heuristic::hybrid;
use lotsizing::instgen::{
    generate, read_instance, solution_from_json, solution_to_json, write_instance, Balance, GenSpec,
    StorageSite,
};
use lotsizing::validate::check_feasibility;
use lotsizing::{FormulationKind, HeuristicParams, RfStrategy};

#[derive(Parser)]
#[command(name = "lotsizing", version, about = "Three-level lot sizing: generation, solving and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Generate(GenerateArgs),
    /// Solve one instance with the heuristic or a MIP formulation.
    Solve(SolveArgs),
    /// Check a solution file against an instance.
    Validate(ValidateArgs),
    /// Run a batch of instances and methods, writing results.csv.
    Bench(BenchArgs),
    /// Summarize a results table or emit deviation boxplot data.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BalanceArg {
    Balanced,
    Unbalanced,
}

#[derive(Clone, Copy, ValueEnum)]
enum SiteArg {
    Warehouses,
    Retailers,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    S1,
    S2,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulationArg {
    Standard,
    Echelon,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rffo,
    MipEs,
    MipStd,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupArg {
    All,
    Retailers,
    Warehouses,
    Horizon,
    Balance,
    PlantCapacityFactor,
    StorageCapacity,
}

impl From<StrategyArg> for RfStrategy {
    fn from(a: StrategyArg) -> Self {
        match a {
            StrategyArg::S1 => RfStrategy::S1,
            StrategyArg::S2 => RfStrategy::S2,
        }
    }
}

impl From<FormulationArg> for FormulationKind {
    fn from(a: FormulationArg) -> Self {
        match a {
            FormulationArg::Standard => FormulationKind::Standard,
            FormulationArg::Echelon => FormulationKind::Echelon,
        }
    }
}

impl From<MethodArg> for Method {
    fn from(a: MethodArg) -> Self {
        match a {
            MethodArg::Rffo => Method::Rffo,
            MethodArg::MipEs => Method::MipEs,
            MethodArg::MipStd => Method::MipStd,
        }
    }
}

impl From<GroupArg> for GroupBy {
    fn from(a: GroupArg) -> Self {
        match a {
            GroupArg::All => GroupBy::All,
            GroupArg::Retailers => GroupBy::Retailers,
            GroupArg::Warehouses => GroupBy::Warehouses,
            GroupArg::Horizon => GroupBy::Horizon,
            GroupArg::Balance => GroupBy::Balance,
            GroupArg::PlantCapacityFactor => GroupBy::PlantCapacityFactor,
            GroupArg::StorageCapacity => GroupBy::StorageCapacity,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    num_retailers: usize,
    #[arg(long)]
    num_warehouses: usize,
    #[arg(long)]
    horizon: usize,
    #[arg(long, value_enum, default_value = "balanced")]
    balance: BalanceArg,
    /// Omit for an uncapacitated plant.
    #[arg(long)]
    plant_capacity_factor: Option<f64>,
    #[arg(long)]
    storage_capacity_factor: Option<f64>,
    #[arg(long, value_enum, default_value = "none")]
    storage_capacity_site: SiteArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; defaults to <id>.json in the current directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Heuristic parameters; unset values follow the defaults for the budget.
#[derive(Args)]
struct ParamArgs {
    #[arg(long, default_value_t = 600.0)]
    total_budget_seconds: f64,
    #[arg(long)]
    rf_budget_seconds: Option<f64>,
    #[arg(long)]
    rf_window: Option<usize>,
    #[arg(long)]
    rf_fix: Option<usize>,
    #[arg(long)]
    fo_window_min: Option<usize>,
    #[arg(long)]
    fo_fix_min: Option<usize>,
    #[arg(long)]
    fo_window_step: Option<usize>,
    #[arg(long)]
    fo_fix_step: Option<usize>,
    #[arg(long)]
    fo_min_rounds: Option<usize>,
    #[arg(long, value_enum, default_value = "s1")]
    rf_strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "echelon")]
    formulation: FormulationArg,
}

impl ParamArgs {
    fn params(&self) -> HeuristicParams {
        let mut p = HeuristicParams::with_total_budget(self.total_budget_seconds);
        if let Some(v) = self.rf_budget_seconds {
            p.rf_budget_seconds = v;
        }
        let fields = [
            (self.rf_window, &mut p.rf_window),
            (self.rf_fix, &mut p.rf_fix),
            (self.fo_window_min, &mut p.fo_window_min),
            (self.fo_fix_min, &mut p.fo_fix_min),
            (self.fo_window_step, &mut p.fo_window_step),
            (self.fo_fix_step, &mut p.fo_fix_step),
            (self.fo_min_rounds, &mut p.fo_min_rounds),
        ];
        for (value, field) in fields {
            if let Some(v) = value {
                *field = v;
            }
        }
        p.rf_strategy = self.rf_strategy.into();
        p.formulation = self.formulation.into();
        p
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "rffo")]
    method: MethodArg,
    #[command(flatten)]
    params: ParamArgs,
    /// Write the solution here.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the heuristic run report here (rffo only).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the MIP model in LP text format here and exit.
    #[arg(long)]
    export_lp: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Generated grid; ignored when instance files are given.
    #[arg(long, value_enum, default_value = "desk")]
    grid: GridArg,
    /// Instance files to run instead of a generated grid.
    #[arg(long, num_args = 1..)]
    instances: Vec<PathBuf>,
    /// Number of grid replicates (instances per cell).
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["rffo", "mip-es"])]
    methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 10.0)]
    budget_seconds: f64,
    #[arg(long, default_value = "bench-out")]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed_base: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value = "s1")]
    rf_strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "echelon")]
    formulation: FormulationArg,
}

#[derive(Args)]
struct ReportArgs {
    /// results.csv produced by the bench command.
    #[arg(long)]
    results: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    group_by: GroupArg,
    /// Method the heuristic is compared against.
    #[arg(long, value_enum, default_value = "mip-es")]
    reference: MethodArg,
    /// Baseline results; switches the output to deviation boxplot data.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let mut spec = GenSpec::new(args.num_retailers, args.num_warehouses, args.horizon, args.seed);
    spec.balance = match args.balance {
        BalanceArg::Balanced => Balance::Balanced,
        BalanceArg::Unbalanced => Balance::Unbalanced,
    };
    spec.plant_capacity_factor = args.plant_capacity_factor;
    spec.storage_capacity_factor = args.storage_capacity_factor;
    spec.storage_capacity_site = match args.storage_capacity_site {
        SiteArg::Warehouses => StorageSite::Warehouses,
        SiteArg::Retailers => StorageSite::Retailers,
        SiteArg::None => StorageSite::None,
    };
    let instance = generate(&spec)?;
    let path = args
        .output
        .unwrap_or_else(|| PathBuf::from(format!("{}.json", instance.meta.id)));
    write_instance(&instance, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let instance = read_instance(&args.instance)?;
    let params = args.params.params();
    params.validate()?;
    let method: Method = args.method.into();
    if let Some(path) = &args.export_lp {
        let kind = match method {
            Method::Rffo => params.formulation,
            Method::MipEs => FormulationKind::Echelon,
            Method::MipStd => FormulationKind::Standard,
        };
        export_model_text(&build(&instance, kind), path)
            .with_context(|| format!("writing {}", path.display()))?;
        return Ok(());
    }
    let summary = match method {
        Method::Rffo => {
            let (solution, report) = hybrid(&instance, &params, &ReferenceSolver)?;
            if let Some(path) = &args.output {
                fs::write(path, solution_to_json(&instance, &solution))?;
            }
            if let Some(path) = &args.report {
                fs::write(path, serde_json::to_string_pretty(&report)?)?;
            }
            json!({
                "instance_id": instance.meta.id,
                "method": method.as_str(),
                "params": params,
                "rf_cost": report.rf_cost,
                "final_cost": report.final_cost,
                "fo_rounds": report.fo_rounds,
                "rf_seconds": report.rf_seconds,
                "fo_seconds": report.fo_seconds,
            })
        }
        Method::MipEs | Method::MipStd => {
            let config = ExperimentConfig {
                budget_seconds: params.total_budget_seconds,
                ..ExperimentConfig::new(InstanceSet::Files(vec![]), ".")
            };
            let started = std::time::Instant::now();
            let row = run_method(&instance, method, &config, &ReferenceSolver);
            if args.output.is_some() || args.report.is_some() {
                log::warn!("--output and --report apply to rffo only");
            }
            json!({
                "instance_id": instance.meta.id,
                "method": method.as_str(),
                "budget_seconds": params.total_budget_seconds,
                "status": row.status,
                "best": row.best,
                "bound": row.bound,
                "gap_pct": row.gap_pct,
                "seconds": started.elapsed().as_secs_f64(),
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let instance = read_instance(&args.instance)?;
    let text = fs::read_to_string(&args.solution)
        .with_context(|| format!("reading {}", args.solution.display()))?;
    let solution = solution_from_json(&instance, &text)?;
    let report = check_feasibility(&instance, &solution)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let instances = if args.instances.is_empty() {
        let mut grid = match args.grid {
            GridArg::Desk => Grid::desk(),
            GridArg::Full => Grid::full(),
        };
        if let Some(r) = args.replicates {
            grid.replicates = r;
        }
        InstanceSet::Grid(grid)
    } else {
        InstanceSet::Files(args.instances)
    };
    let mut config = ExperimentConfig::new(instances, args.output_dir);
    config.methods = args.methods.into_iter().map(Method::from).collect();
    config.budget_seconds = args.budget_seconds;
    config.seed_base = args.seed_base;
    config.workers = args.workers;
    config.rf_strategy = args.rf_strategy.into();
    config.formulation = args.formulation.into();
    let rows = run_benchmark(&config)?;
    let failed = rows.iter().filter(|r| r.best.is_none()).count();
    println!(
        "{} runs, {} without a solution; results in {}",
        rows.len(),
        failed,
        config.output_dir.join(lotsizing::bench::RESULTS_FILE).display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let rows = read_results(&args.results)?;
    let text = match &args.baseline {
        Some(path) => {
            let baseline = read_results(path)?;
            let data = emit_deviation_data(&rows, &baseline, Method::Rffo);
            serde_json::to_string_pretty(&data)?
        }
        None => {
            let summary = emit_summary(&rows, args.group_by.into(), args.reference.into());
            let mut writer = csv::Writer::from_writer(Vec::new());
            for row in &summary {
                writer.serialize(row)?;
            }
            String::from_utf8(writer.into_inner()?)?
        }
    };
    emit(args.output.as_deref(), text.trim_end())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a).map(|_| ExitCode::SUCCESS),
        Command::Solve(a) => cmd_solve(a).map(|_| ExitCode::SUCCESS),
        Command::Validate(a) => cmd_validate(a),
        Command::Bench(a) => cmd_bench(a).map(|_| ExitCode::SUCCESS),
        Command::Report(a) => cmd_report(a).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
