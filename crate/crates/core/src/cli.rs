//! Command-line front end.
//!
//! Every command is deterministic given its flags: files and standard
//! output depend only on inputs and `--seed`. Wall-clock times go to
//! standard error, and into the comparison table only with `--timing`.

use crate::eval::{self, EvalConfig, EvalError, DEFAULT_OUTCOME_BUDGET, DEFAULT_TAIL_EPS};
use crate::instance::{
    generate_crowdsourcing, generate_ridehail, read_instance, write_instance, CrowdParams, InstanceError,
    MarketInstance, ResponseShape, RideHailParams,
};
use crate::demand::Family;
use crate::pricer::{
    default_delta, price_capped_mrp, price_grid_search, price_mrp, read_prices, solve_prices, write_prices,
    GridSearchConfig, PriceAssignment, PricingError, SearchMode,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "priceflow", version, about = "Joint pricing and matching under stochastic demand")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic instance.
    Generate(GenerateArgs),
    /// Compute prices for an instance.
    Solve(SolveArgs),
    /// Evaluate prices against realized demand.
    Evaluate(EvaluateArgs),
    /// Run several pricing methods and tabulate their expected profit.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    Ridehail,
    Crowd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Linear,
    #[value(alias = "sigmoid")]
    Logistic,
}

impl From<Shape> for ResponseShape {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Linear => ResponseShape::Linear,
            Shape::Logistic => ResponseShape::Logistic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Binomial,
    Poisson,
}

/// Where the instance comes from: a file, or a generator and seed.
#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Instance JSON file.
    #[arg(long, conflicts_with = "generate")]
    pub instance: Option<PathBuf>,
    /// Generate the instance instead of reading one.
    #[arg(long, value_enum)]
    pub generate: Option<GeneratorKind>,
    #[command(flatten)]
    pub generator: GeneratorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GeneratorArgs {
    /// Resources: taxis or tasks.
    #[arg(long)]
    pub resources: Option<usize>,
    /// Groups: ride requests or worker types.
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long, value_enum, default_value = "linear")]
    pub shape: Shape,
    /// Demand family for crowdsourcing groups.
    #[arg(long, value_enum, default_value = "binomial")]
    pub family: FamilyArg,
    /// Potential participants per crowdsourcing group.
    #[arg(long, default_value_t = 1)]
    pub participants: u32,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub generate: GeneratorKind,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output instance file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Proposed,
    Mrp,
    CappedMrp,
    Grid,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Mrp => "mrp",
            Method::CappedMrp => "capped-mrp",
            Method::Grid => "grid",
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid step of the pricing flow; defaults to 1e-3 times the largest
    /// group size.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum, default_value = "proposed")]
    pub method: Method,
    /// Grid points per group for the grid-search method.
    #[arg(long, default_value_t = 9)]
    pub grid_points: usize,
    /// Price file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: Source,
    /// Price file; when absent the instance is priced with the flow method.
    #[arg(long)]
    pub prices: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Enumerate demand outcomes instead of sampling.
    #[arg(long)]
    pub exact: bool,
    /// Tail mass dropped from Poisson supports in exact evaluation.
    #[arg(long, default_value_t = DEFAULT_TAIL_EPS)]
    pub eps: f64,
    /// Largest number of outcomes exact evaluation may enumerate.
    #[arg(long, default_value_t = DEFAULT_OUTCOME_BUDGET)]
    pub budget: u64,
    /// Exit with status 1 unless the surrogate bounds hold.
    #[arg(long)]
    pub check_bounds: bool,
    /// Report JSON file; printed to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-sample profits as CSV.
    #[arg(long)]
    pub samples_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Instance files, one table block each.
    #[arg(long, conflicts_with = "generate")]
    pub instance: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub generate: Option<GeneratorKind>,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Generated instances, seeded `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long, value_delimiter = ',', default_value = "proposed,mrp,capped-mrp")]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 9)]
    pub grid_points: usize,
    /// Fill the time_seconds column with measured wall time.
    #[arg(long)]
    pub timing: bool,
    /// CSV file; printed to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("surrogate bounds violated: {0}")]
    BoundsViolated(String),
}

impl CliError {
    /// 1 for solver failures, 2 for input, output and configuration errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Instance(_) => 2,
            CliError::Pricing(PricingError::Io { .. } | PricingError::PriceFile(_) | PricingError::InvalidDelta(_)) => 2,
            CliError::Pricing(_) => 1,
            CliError::Eval(EvalError::PriceCount { .. } | EvalError::Demand { .. }) => 2,
            CliError::Eval(_) => 1,
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::BoundsViolated(_) => 1,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn generate(kind: GeneratorKind, g: &GeneratorArgs, seed: u64) -> Result<MarketInstance, CliError> {
    let inst = match kind {
        GeneratorKind::Ridehail => {
            let mut p = RideHailParams { response: g.shape.into(), ..RideHailParams::default() };
            p.num_taxis = g.resources.unwrap_or(p.num_taxis);
            p.num_groups = g.groups.unwrap_or(p.num_groups);
            generate_ridehail(seed, &p)?
        }
        GeneratorKind::Crowd => {
            let family = match g.family {
                FamilyArg::Binomial => Family::Binomial,
                FamilyArg::Poisson => Family::Poisson,
            };
            let mut p = CrowdParams {
                response: g.shape.into(),
                family,
                participants: g.participants,
                ..CrowdParams::default()
            };
            p.num_tasks = g.resources.unwrap_or(p.num_tasks);
            p.num_worker_types = g.groups.unwrap_or(p.num_worker_types);
            generate_crowdsourcing(seed, &p)?
        }
    };
    Ok(inst)
}

fn load(source: &Source, seed: u64) -> Result<MarketInstance, CliError> {
    match (&source.instance, source.generate) {
        (Some(path), _) => Ok(read_instance(path)?),
        (None, Some(kind)) => generate(kind, &source.generator, seed),
        (None, None) => Err(CliError::Config("one of --instance or --generate is required".into())),
    }
}

fn resolve_delta(inst: &MarketInstance, delta: Option<f64>) -> Result<f64, CliError> {
    match delta {
        Some(d) if !(d.is_finite() && d > 0.0) => Err(CliError::Config(format!("--delta must be positive, got {d}"))),
        Some(d) => Ok(d),
        None => Ok(default_delta(inst)),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let inst = generate(args.generate, &args.generator, args.seed)?;
    write_instance(&inst, &args.out)?;
    println!("resources {} groups {} edges {}", inst.resources().len(), inst.groups().len(), inst.edges().len());
    Ok(())
}

fn price(inst: &MarketInstance, method: Method, delta: f64, grid_points: usize) -> Result<PriceAssignment, CliError> {
    let pa = match method {
        Method::Proposed => solve_prices(inst, delta)?,
        Method::Mrp => price_mrp(inst)?,
        Method::CappedMrp => price_capped_mrp(inst)?,
        Method::Grid => price_grid_search(
            inst,
            &GridSearchConfig { points_per_group: grid_points, mode: SearchMode::Auto, ..GridSearchConfig::default() },
        )?,
    };
    Ok(pa)
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let inst = load(&args.source, args.seed)?;
    let delta = resolve_delta(&inst, args.delta)?;
    let start = Instant::now();
    let pa = price(&inst, args.method, delta, args.grid_points)?;
    let elapsed = start.elapsed().as_secs_f64();
    write_prices(&inst, &pa, &args.out)?;
    println!("method {} delta {delta:e}", args.method.name());
    println!("fhat {}", pa.fhat);
    if let Some(flow) = &pa.flow {
        println!("phases {} augmentations {}", flow.stats.phases, flow.stats.augmentations);
    }
    for note in &pa.notes {
        println!("note {note}");
    }
    eprintln!("wall time {elapsed:.6} s");
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    if args.samples == 0 && !args.exact {
        return Err(CliError::Config("--samples must be at least 1".into()));
    }
    let inst = load(&args.source, args.seed)?;
    let prices = match &args.prices {
        Some(path) => read_prices(&inst, path)?,
        None => solve_prices(&inst, resolve_delta(&inst, args.delta)?)?.prices,
    };
    let config = EvalConfig { samples: args.samples, seed: args.seed, exact: args.exact, eps: args.eps, budget: args.budget };
    let report = eval::evaluate(&inst, &prices, &config)?;
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    match &args.out {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }
    if let Some(path) = &args.samples_csv {
        let mut buf = Vec::new();
        eval::write_sample_csv(&report.sample_profits, &mut buf).expect("in-memory write");
        std::fs::write(path, buf).map_err(|source| CliError::Io { path: path.clone(), source })?;
    }
    if args.check_bounds && !report.bounds.holds() {
        let b = report.bounds;
        return Err(CliError::BoundsViolated(format!(
            "fhat {} expected {} slack {} (lower ok: {}, upper ok: {})",
            b.fhat, b.expected, b.slack, b.lower_ok, b.upper_ok
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareRow {
    instance: String,
    method: &'static str,
    obj: f64,
    stderr: f64,
    time_seconds: Option<f64>,
    best: bool,
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    if args.samples == 0 {
        return Err(CliError::Config("--samples must be at least 1".into()));
    }
    if args.methods.is_empty() {
        return Err(CliError::Config("--methods needs at least one method".into()));
    }
    let mut instances = Vec::new();
    if let Some(kind) = args.generate {
        for i in 0..args.count {
            let seed = args.seed.wrapping_add(i);
            instances.push((format!("{}-{seed}", kind_name(kind)), generate(kind, &args.generator, seed)?));
        }
    } else if args.instance.is_empty() {
        return Err(CliError::Config("one of --instance or --generate is required".into()));
    } else {
        for path in &args.instance {
            instances.push((path.display().to_string(), read_instance(path)?));
        }
    }

    let mut rows = Vec::new();
    for (name, inst) in &instances {
        let delta = resolve_delta(inst, args.delta)?;
        let first = rows.len();
        for &method in &args.methods {
            let start = Instant::now();
            let pa = price(inst, method, delta, args.grid_points)?;
            let elapsed = start.elapsed().as_secs_f64();
            let est = eval::estimate_expected_profit(inst, &pa.prices, args.samples, args.seed)?;
            eprintln!("{name} {}: obj {} ({elapsed:.6} s)", method.name(), est.mean);
            rows.push(CompareRow {
                instance: name.clone(),
                method: method.name(),
                obj: est.mean,
                stderr: est.stderr,
                time_seconds: args.timing.then_some(elapsed),
                best: false,
            });
        }
        let top = rows[first..].iter().map(|r| r.obj).fold(f64::NEG_INFINITY, f64::max);
        for r in &mut rows[first..] {
            r.best = r.obj == top;
        }
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        writer.serialize(row).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    match &args.out {
        Some(path) => std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.clone(), source })?,
        None => print!("{}", String::from_utf8(bytes).expect("csv is utf-8")),
    }
    Ok(())
}

fn kind_name(kind: GeneratorKind) -> &'static str {
    match kind {
        GeneratorKind::Ridehail => "ridehail",
        GeneratorKind::Crowd => "crowd",
    }
}
