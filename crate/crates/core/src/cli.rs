//! Command-line front end for the `mts` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cov::{build_targets, mts_cov, CovMtsOptions, TargetSpec};
use crate::dataset::Dataset;
use crate::error::MtsError;
use crate::mean::{mts_mean, MeanMtsOptions};
use crate::qp::ConstraintId;
use crate::sim::report::summarize;
use crate::sim::runner::{records_to_csv, run_monte_carlo_with_progress, RunOptions, SimConfig};
use crate::stats::{SymMatrix, WhitenMode};

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

/// Exit status for bad input files, dimensions or configuration.
pub const EXIT_INPUT: i32 = 2;
/// Exit status for numerical or I/O failures.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "mts", version, about = "Multi-target shrinkage of means and covariance matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Shrink the mean of a dataset toward the means of auxiliary datasets.
    EstimateMean(EstimateMeanArgs),
    /// Shrink the sample covariance toward structured and auxiliary targets.
    EstimateCov(EstimateCovArgs),
    /// Run a Monte Carlo sweep from a JSON config.
    Simulate(SimulateArgs),
    /// List the covariance target specs accepted by --target.
    TargetsList,
}

#[derive(Debug, Args)]
pub struct EstimateMeanArgs {
    /// Primary dataset (CSV, one observation per row).
    #[arg(long)]
    pub input: PathBuf,
    /// Auxiliary dataset; repeat for several targets.
    #[arg(long = "aux", required = true)]
    pub aux: Vec<PathBuf>,
    /// Drop the per-observation weight constraint.
    #[arg(long)]
    pub no_weight_constraint: bool,
    /// Whiten before estimating intensities: full, partial or partial:<k>.
    #[arg(long)]
    pub whiten: Option<WhitenMode>,
    /// Output JSON path; standard output if omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateCovArgs {
    /// Primary dataset (CSV, one observation per row).
    #[arg(long)]
    pub input: PathBuf,
    /// Target: identity, diag, const-corr or aux:<path>; repeatable.
    #[arg(long = "target", required = true)]
    pub targets: Vec<String>,
    /// Whiten before estimating intensities: full, partial or partial:<k>.
    #[arg(long)]
    pub whiten: Option<WhitenMode>,
    /// Treat the data as zero-mean (uncentered second moments).
    #[arg(long)]
    pub assume_zero_mean: bool,
    /// Include the built target matrices in the output.
    #[arg(long)]
    pub dump_targets: bool,
    /// Output JSON path; standard output if omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Seed; overrides the config. A random seed is chosen and printed if
    /// neither sets one.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "MTS_WORKERS", default_value_t = 0)]
    pub workers: usize,
    /// Per-repetition records (CSV).
    #[arg(long, default_value = "records.csv")]
    pub records: PathBuf,
    /// Summary per sweep point and estimator (JSON).
    #[arg(long, default_value = "summary.json")]
    pub summary: PathBuf,
    /// Suppress progress output.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<MtsError> for CliError {
    fn from(e: MtsError) -> Self {
        let code = match e {
            MtsError::Read { .. }
            | MtsError::DimensionMismatch { .. }
            | MtsError::InsufficientObservations { .. }
            | MtsError::NonFinite { .. }
            | MtsError::EmptyDimensions
            | MtsError::InvalidParameter(_)
            | MtsError::InvalidWhitenRank { .. }
            | MtsError::Json(_) => EXIT_INPUT,
            _ => EXIT_FAILURE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses arguments, runs the command and returns the exit status. Errors
/// are reported on standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::EstimateMean(a) => cmd_estimate_mean(&a),
        Command::EstimateCov(a) => cmd_estimate_cov(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::TargetsList => {
            print!("{}", targets_list());
            Ok(())
        }
    }
}

pub fn targets_list() -> String {
    [
        "identity     scaled identity (trace(S)/p)·I",
        "diag         diagonal of S",
        "const-corr   constant-correlation matrix built from S",
        "aux:<path>   sample covariance of another CSV dataset",
    ]
    .iter()
    .map(|l| format!("{l}\n"))
    .collect()
}

fn load(path: &Path) -> CliResult<Dataset> {
    Ok(Dataset::from_csv_path(path)?)
}

fn check_dims(primary: &Dataset, primary_path: &Path, other: &Dataset, other_path: &Path) -> CliResult<()> {
    if other.p() != primary.p() {
        return Err(CliError::input(format!(
            "{} has {} columns but {} has {}; all datasets need the same dimension",
            other_path.display(),
            other.p(),
            primary_path.display(),
            primary.p()
        )));
    }
    Ok(())
}

fn rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    m.to_rows()
}

#[derive(Serialize)]
struct EstimateOutput<E: Serialize> {
    schema_version: u32,
    targets: Vec<String>,
    estimate: E,
    lambda: Vec<f64>,
    #[serde(rename = "A_hat")]
    a_hat: Vec<Vec<f64>>,
    b_hat: Vec<f64>,
    objective: f64,
    active_set: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_matrices: Option<Vec<Vec<Vec<f64>>>>,
}

fn constraint_label(c: &ConstraintId) -> String {
    match c {
        ConstraintId::NonNegative(k) => format!("nonnegative:{k}"),
        ConstraintId::SimplexSum => "sum".to_string(),
        ConstraintId::Extra(i) => format!("extra:{i}"),
    }
}

fn write_json<T: Serialize>(value: &T, output: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(MtsError::from)?;
    text.push('\n');
    match output {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::from(MtsError::Io(e)))?;
            Ok(())
        }
    }
}

/// Writes through a temp file in the target directory and renames it, so a
/// failure never leaves a truncated file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let fail = |e: String| CliError {
        code: EXIT_FAILURE,
        message: format!("cannot write {}: {e}", path.display()),
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| fail(e.to_string()))?;
    tmp.write_all(bytes).map_err(|e| fail(e.to_string()))?;
    tmp.as_file().sync_all().map_err(|e| fail(e.to_string()))?;
    tmp.persist(path).map_err(|e| fail(e.error.to_string()))?;
    Ok(())
}

pub fn cmd_estimate_mean(a: &EstimateMeanArgs) -> CliResult<()> {
    let x = load(&a.input)?;
    let mut aux = Vec::with_capacity(a.aux.len());
    for path in &a.aux {
        let d = load(path)?;
        check_dims(&x, &a.input, &d, path)?;
        aux.push(d);
    }
    let opts = MeanMtsOptions {
        weight_constraint: !a.no_weight_constraint,
        whiten: a.whiten,
        covariance_for_whitening: None,
    };
    let r = mts_mean(&x, &aux, &opts)?;
    let out = EstimateOutput {
        schema_version: OUTPUT_SCHEMA_VERSION,
        targets: a.aux.iter().map(|p| format!("aux:{}", p.display())).collect(),
        estimate: r.estimate.iter().copied().collect::<Vec<f64>>(),
        lambda: r.lambda.iter().copied().collect(),
        a_hat: rows(&r.a_hat),
        b_hat: r.b_hat.iter().copied().collect(),
        objective: r.objective,
        active_set: r.active_set.iter().map(constraint_label).collect(),
        target_matrices: None,
    };
    write_json(&out, a.output.as_deref())
}

/// Parses a --target value, loading aux datasets.
pub fn parse_target(spec: &str) -> CliResult<(TargetSpec, Option<PathBuf>)> {
    if let Some(path) = spec.strip_prefix("aux:") {
        let path = PathBuf::from(path);
        let d = load(&path)?;
        return Ok((TargetSpec::AuxDataset(d), Some(path)));
    }
    spec.parse::<TargetSpec>().map(|t| (t, None)).map_err(|_| {
        CliError::input(format!(
            "unknown target '{spec}'; expected identity, diag, const-corr or aux:<path>"
        ))
    })
}

pub fn cmd_estimate_cov(a: &EstimateCovArgs) -> CliResult<()> {
    let x = load(&a.input)?;
    let mut specs = Vec::with_capacity(a.targets.len());
    let mut names = Vec::with_capacity(a.targets.len());
    for t in &a.targets {
        let (spec, path) = parse_target(t)?;
        if let (TargetSpec::AuxDataset(d), Some(path)) = (&spec, &path) {
            check_dims(&x, &a.input, d, path)?;
        }
        names.push(match &path {
            Some(p) => format!("aux:{}", p.display()),
            None => spec.name(),
        });
        specs.push(spec);
    }
    let opts = CovMtsOptions {
        whiten: a.whiten,
        assume_zero_mean: a.assume_zero_mean,
    };
    let r = mts_cov(&x, &specs, &opts)?;
    let target_matrices = if a.dump_targets {
        Some(build_targets(&x, &specs, &opts)?.iter().map(rows).collect())
    } else {
        None
    };
    let out = EstimateOutput {
        schema_version: OUTPUT_SCHEMA_VERSION,
        targets: names,
        estimate: rows(&r.estimate),
        lambda: r.lambda.iter().copied().collect(),
        a_hat: rows(&r.a_hat),
        b_hat: r.b_hat.iter().copied().collect(),
        objective: r.objective,
        active_set: r.active_set.iter().map(constraint_label).collect(),
        target_matrices,
    };
    write_json(&out, a.output.as_deref())
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| MtsError::Read {
        path: a.config.clone(),
        message: e.to_string(),
    })?;
    let mut cfg = SimConfig::from_json(&text).map_err(|e| {
        CliError::input(format!("invalid config {}: {e}", a.config.display()))
    })?;
    if let Some(s) = a.seed {
        cfg.seed = Some(s);
    }
    if cfg.seed.is_none() {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        cfg.seed = Some(s);
    }
    cfg.validate()?;
    let quiet = a.quiet;
    let progress = move |done: usize, total: usize| {
        if !quiet && (done == total || done % 10 == 0) {
            eprint!("\r{done}/{total} models");
            if done == total {
                eprintln!();
            }
        }
    };
    let records = run_monte_carlo_with_progress(&cfg, &RunOptions { workers: a.workers }, &progress)?;
    let csv = records_to_csv(&records)?;
    let summary = summarize(&cfg, &records)?;
    let mut json = summary.to_json()?;
    json.push('\n');
    write_atomic(&a.records, csv.as_bytes())?;
    write_atomic(&a.summary, json.as_bytes())?;
    let failed = records.iter().filter(|r| !r.ok()).count();
    if failed > 0 && !quiet {
        eprintln!("{failed} of {} estimator runs failed; see the status column", records.len());
    }
    Ok(())
}
