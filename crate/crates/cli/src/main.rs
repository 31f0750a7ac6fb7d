mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use hazardboost::grid::DEFAULT_QUANTILES;
use hazardboost::metrics::DEFAULT_AUC_GRID;
use hazardboost::simulation::DEFAULT_EPOCH_RATE;
use hazardboost::*;
use log::{info, warn};

const SUBCOMMANDS: &[&str] = &["simulate", "train", "cv", "predict", "evaluate", "importance"];

/// Boosted nonparametric hazard estimation with time-dependent covariates.
#[derive(Parser, Debug)]
#[command(name = "hazardboost", version, args_override_self = true)]
struct Cli {
    /// Worker threads for tree search, cross-validation, bootstrap and
    /// simulation [default: available parallelism]
    #[arg(long, global = true, env = "HAZARDBOOST_THREADS", value_parser = positive)]
    threads: Option<usize>,

    /// Log progress to standard error with timestamps
    #[arg(short, long, global = true)]
    verbose: bool,

    /// File of `key = value` lines supplying any flag; command-line flags win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a benchmark dataset
    Simulate(SimulateArgs),
    /// Fit a boosted hazard model
    Train(TrainArgs),
    /// Cross-validate over (L, M) on held-out likelihood risk
    Cv(CvArgs),
    /// Predict hazards at points, or survival along trajectories
    Predict(PredictArgs),
    /// Score a model on test data (L2 error against a known hazard, AUC_t)
    Evaluate(EvaluateArgs),
    /// Split-gain variable importance, optionally with bootstrap intervals
    Importance(ImportanceArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// lambda1, lambda2, lambda3, lambda4 or constant:<rate>[:<horizon>]
    #[arg(long)]
    family: HazardFamily,
    /// Number of subjects
    #[arg(long, value_parser = positive)]
    n: usize,
    /// Number of irrelevant N(0, 1) covariates
    #[arg(long, default_value_t = 0)]
    irrelevant: usize,
    /// Mean covariate jumps per unit time
    #[arg(long, default_value_t = DEFAULT_EPOCH_RATE, value_parser = non_negative)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also censor at an independent uniform time on (0, horizon)
    #[arg(long)]
    uniform_censoring: bool,
    /// Output dataset CSV
    #[arg(long)]
    out: PathBuf,
    /// Output truth file recording family, seed and settings
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Candidate splits per axis at the k/q quantiles
    #[arg(long, default_value_t = DEFAULT_QUANTILES, value_parser = positive)]
    quantiles: usize,
    /// Weight covariate quantiles by reading, not by time spent at the value
    #[arg(long)]
    unweighted_quantiles: bool,
}

impl GridArgs {
    fn weighting(&self) -> QuantileWeighting {
        if self.unweighted_quantiles {
            QuantileWeighting::Count
        } else {
            QuantileWeighting::Duration
        }
    }
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input dataset CSV: id,time,<covariates...>,followup,event
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated names of categorical covariate columns
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of trees
    #[arg(long, value_parser = positive)]
    m: usize,
    /// Maximum splits per tree
    #[arg(long, value_parser = positive)]
    l: usize,
    /// Learning rate in (0, 1]
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE_ARG, value_parser = learning_rate)]
    nu: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Write the split-candidate grid as text
    #[arg(long)]
    dump_grid: Option<PathBuf>,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
}

const DEFAULT_LEARNING_RATE_ARG: f64 = hazardboost::boosting::DEFAULT_LEARNING_RATE;

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Candidate maximum splits per tree
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4", value_parser = positive)]
    l: Vec<usize>,
    /// Candidate tree counts: start:stop:step or a comma-separated list
    #[arg(long, default_value = "100:300:50", value_parser = tree_counts)]
    m: TreeCounts,
    /// Number of folds
    #[arg(long, default_value_t = 5, value_parser = at_least_two)]
    k: usize,
    /// Seed of the fold shuffle
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Learning rate in (0, 1]
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE_ARG, value_parser = learning_rate)]
    nu: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Output CSV [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with columns t,<covariates...>; emits the hazard at each row
    #[arg(long, conflicts_with_all = ["data", "times"], required_unless_present = "data")]
    points: Option<PathBuf>,
    /// Dataset CSV; emits survival along each subject's trajectory, blank
    /// at times past its last reading
    #[arg(long, requires = "times")]
    data: Option<PathBuf>,
    /// Comma-separated times for survival predictions
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
    /// Output CSV [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Test dataset CSV
    #[arg(long)]
    data: PathBuf,
    /// Truth file written by `simulate`, or a family name; needed for l2
    #[arg(long)]
    truth: Option<String>,
    /// Metrics to compute: l2, auc
    #[arg(long, value_delimiter = ',', default_value = "l2,auc")]
    metrics: Vec<Metric>,
    /// Number of quantiles of observed event times used as AUC times
    #[arg(long, default_value_t = DEFAULT_AUC_GRID, value_parser = positive)]
    auc_grid: usize,
    /// Evaluation points drawn per test subject for l2
    #[arg(long, default_value_t = 1, value_parser = positive)]
    points_per_subject: usize,
    /// Seed of the evaluation points
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Metric {
    L2,
    Auc,
}

#[derive(Args, Debug)]
struct ImportanceArgs {
    #[arg(long)]
    model: PathBuf,
    /// Bootstrap resamples for percentile intervals (needs --data)
    #[arg(long, requires = "data", value_parser = at_least_two)]
    bootstrap: Option<usize>,
    /// Seed of the bootstrap resamples
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training dataset, refitted on each resample with the model's M, L, nu
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated names of categorical covariate columns
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    #[command(flatten)]
    grid: GridArgs,
    /// Output CSV [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct TreeCounts(Vec<usize>);

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("expected a positive integer, got `{s}`")),
    }
}

fn at_least_two(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        _ => Err(format!("expected an integer of at least 2, got `{s}`")),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a non-negative number, got `{s}`")),
    }
}

fn learning_rate(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v <= 1.0 => Ok(v),
        _ => Err(format!("expected a number in (0, 1], got `{s}`")),
    }
}

fn tree_counts(s: &str) -> Result<TreeCounts, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (positive(start)?, positive(stop)?, positive(step)?);
            if stop < start {
                return Err(format!("empty range `{s}`"));
            }
            (start..=stop).step_by(step).collect()
        }
        [list] => list.split(',').map(positive).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("expected start:stop:step or a list, got `{s}`")),
    };
    Ok(TreeCounts(values))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn schema_spec(categorical: &[String]) -> SchemaSpec {
    if categorical.is_empty() {
        SchemaSpec::AllContinuous
    } else {
        SchemaSpec::with_categorical(categorical.iter().cloned())
    }
}

/// Loads, validates and imputes terminal jumps.
fn load_training(path: &Path, spec: &SchemaSpec) -> Result<Dataset> {
    let ds = load_dataset(path, spec).with_context(|| format!("reading {}", path.display()))?;
    let ds = ds.validated()?.impute_terminal_jumps();
    info!(
        "{}: {} subjects, {} events, {} covariates",
        path.display(),
        ds.n(),
        ds.event_count(),
        ds.p()
    );
    Ok(ds)
}

fn simulate_cmd(args: SimulateArgs) -> Result<()> {
    let mut spec = SimulationSpec::new(args.family, args.n, args.seed)
        .with_irrelevant(args.irrelevant)
        .with_epoch_rate(args.rate);
    if args.uniform_censoring {
        spec.censoring = Censoring::Uniform;
    }
    let data = simulate(&spec);
    write_dataset_file(&data.dataset, &args.out)?;
    info!(
        "simulated {} subjects from {}, {} events",
        data.dataset.n(),
        spec.family,
        data.dataset.event_count()
    );
    if let Some(truth) = args.truth {
        std::fs::write(&truth, spec.to_text()).with_context(|| format!("writing {}", truth.display()))?;
    }
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let ds = load_training(&args.data.data, &schema_spec(&args.data.categorical))?;
    let grid = build_grid(&ds, args.grid.quantiles, args.grid.weighting());
    if let Some(path) = &args.dump_grid {
        let names: Vec<String> = ds.schema.names().map(str::to_string).collect();
        std::fs::write(path, grid.dump(&names))?;
    }
    let model = fit(&ds, &grid, FitConfig::new(args.m, args.l).with_learning_rate(args.nu))?;
    info!(
        "training risk {} -> {}",
        model.risk_trace[0],
        model.risk_trace.last().copied().unwrap_or(f64::NAN)
    );
    write_model(&model, &args.out)?;
    Ok(())
}

fn cv_cmd(args: CvArgs) -> Result<()> {
    let ds = load_training(&args.data.data, &schema_spec(&args.data.categorical))?;
    let config = CvConfig {
        max_splits: args.l,
        trees: args.m.0,
        folds: args.k,
        learning_rate: args.nu,
        seed: args.seed,
        num_quantiles: args.grid.quantiles,
        weighting: args.grid.weighting(),
    };
    let report = kfold_cv(&ds, &config)?;
    let mut out = open_output(args.out.as_deref())?;
    let folds: Vec<String> = (1..=config.folds).map(|f| format!("fold_{f}")).collect();
    writeln!(out, "l,m,mean_risk,valid_folds,{},selected", folds.join(","))?;
    for cell in &report.cells {
        let risks: Vec<String> = cell
            .fold_risks
            .iter()
            .map(|r| r.map_or_else(String::new, |v| v.to_string()))
            .collect();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            cell.max_splits,
            cell.trees,
            cell.mean_risk.map_or_else(String::new, |v| v.to_string()),
            cell.valid_folds(),
            risks.join(","),
            (cell.max_splits, cell.trees) == report.selected
        )?;
    }
    out.flush()?;
    eprintln!("selected L={} M={}", report.selected.0, report.selected.1);
    Ok(())
}

fn predict_cmd(args: PredictArgs) -> Result<()> {
    let model = read_model(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let mut out = open_output(args.out.as_deref())?;
    if let Some(points) = &args.points {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(points)?;
        let header = rdr.headers()?.clone();
        let names: Vec<&str> = model.schema.names().collect();
        if header.len() != names.len() + 1 || header.iter().skip(1).ne(names.iter().copied()) {
            bail!("points header must be t,{}", names.join(","));
        }
        writeln!(out, "{},hazard", header.iter().collect::<Vec<_>>().join(","))?;
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let line = row + 2;
            let t: f64 = record[0].parse().with_context(|| format!("line {line}: bad time `{}`", &record[0]))?;
            let x = (0..names.len())
                .map(|j| model.schema.encode(j, &record[j + 1]))
                .collect::<Result<Vec<f64>, _>>()
                .with_context(|| format!("line {line}"))?;
            let hazard = model.predict_hazard(t, &x)?;
            writeln!(out, "{},{hazard}", record.iter().collect::<Vec<_>>().join(","))?;
        }
    } else if let Some(data) = &args.data {
        let ds = load_dataset(data, &SchemaSpec::Fixed(model.schema.clone()))?.validated()?;
        writeln!(out, "id,t,survival")?;
        let mut uncovered = 0usize;
        for sample in &ds.samples {
            for &t in &args.times {
                if t > sample.covered_until() {
                    uncovered += 1;
                    writeln!(out, "{},{t},", sample.id)?;
                    continue;
                }
                let s = model.predict_survival(sample, t).with_context(|| format!("subject {}", sample.id))?;
                writeln!(out, "{},{t},{s}", sample.id)?;
            }
        }
        if uncovered > 0 {
            warn!("{uncovered} (subject, time) pairs lie past the observed trajectory; survival left blank");
        }
    }
    out.flush()?;
    Ok(())
}

fn truth_family(truth: &str) -> Result<HazardFamily> {
    if Path::new(truth).is_file() {
        let text = std::fs::read_to_string(truth)?;
        Ok(SimulationSpec::from_text(&text)?.family)
    } else {
        Ok(truth.parse()?)
    }
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let model = read_model(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let ds = load_dataset(&args.data, &SchemaSpec::Fixed(model.schema.clone()))?.validated()?;
    let family = args.truth.as_deref().map(truth_family).transpose()?;
    let mut out = open_output(args.out.as_deref())?;
    writeln!(out, "metric,t,value,pair_count")?;
    if args.metrics.contains(&Metric::L2) {
        let Some(family) = family else {
            bail!("the l2 metric needs --truth");
        };
        let points = sample_evaluation_points(&ds, &family, args.points_per_subject, args.seed);
        let err = model_l2_error(&model, &points)?;
        writeln!(out, "l2,,{err},")?;
    }
    if args.metrics.contains(&Metric::Auc) {
        let times = auc_time_grid(&ds, args.auc_grid);
        for est in auc_curve(&model, &ds, &times)? {
            writeln!(out, "auc,{},{},{}", est.t, est.auc, est.pairs)?;
        }
        if let Some(family) = family {
            for est in auc_curve(&family, &ds, &times)? {
                writeln!(out, "auc_truth,{},{},{}", est.t, est.auc, est.pairs)?;
            }
        }
        warn_if_extended(&ds, &times);
    }
    out.flush()?;
    Ok(())
}

fn warn_if_extended(ds: &Dataset, times: &[f64]) {
    let extended = ds
        .samples
        .iter()
        .filter(|s| s.event && times.iter().any(|&t| s.covered_until() < t))
        .count();
    if extended > 0 {
        warn!("AUC: covariates of {extended} event subjects carried forward past their event");
    }
}

fn importance_cmd(args: ImportanceArgs) -> Result<()> {
    let model = read_model(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let report = match (args.bootstrap, &args.data) {
        (Some(resamples), Some(data)) => {
            let ds = load_training(data, &schema_spec(&args.categorical))?;
            if ds.schema != model.schema {
                bail!("dataset columns do not match the model's schema");
            }
            let fit_config = FitConfig::new(model.trees.len().max(1), model.max_splits)
                .with_learning_rate(model.learning_rate);
            let mut config = BootstrapConfig::new(fit_config, resamples, args.seed);
            config.num_quantiles = args.grid.quantiles;
            config.weighting = args.grid.weighting();
            let mut report = bootstrap_importance(&ds, &config)?;
            // point estimates come from the supplied model
            let fitted = variable_importance(&model);
            report.raw = fitted.raw;
            report.relative = fitted.relative;
            report.degenerate = fitted.degenerate;
            report
        }
        _ => variable_importance(&model),
    };
    if report.degenerate {
        warn!("model has no splits; relative importances reported as 0");
    }
    let mut out = open_output(args.out.as_deref())?;
    writeln!(out, "variable,raw,relative,ci_low,ci_high")?;
    for (k, name) in report.names.iter().enumerate() {
        let (lo, hi) = report
            .intervals
            .as_ref()
            .map_or((String::new(), String::new()), |iv| (iv[k].0.to_string(), iv[k].1.to_string()));
        writeln!(out, "{name},{},{},{lo},{hi}", report.raw[k], report.relative[k])?;
    }
    out.flush()?;
    Ok(())
}

fn init_logging(verbose: bool) {
    let level = if verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp_millis()
        .target(env_logger::Target::Stderr)
        .init();
}

fn run(cli: Cli) -> Result<()> {
    init_logging(cli.verbose);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Simulate(a) => simulate_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Cv(a) => cv_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Importance(a) => importance_cmd(a),
    }
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let args = match config::expand(args, SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            let _ = Cli::command().error(clap::error::ErrorKind::Io, format!("{e:#}")).print();
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
