//! `pwcrt`: analyze, simulate, compare, generate and benchmark CAN message
//! sets under random transmission errors.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 when an iteration does
//! not converge within its horizon.

mod commands;
mod input;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use manifest::RunManifest;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PWCRT_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] pwcrt_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_convergence() => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "pwcrt", version, about = "Probabilistic worst-case response times on CAN")]
pub struct Cli {
    /// Worker threads for per-frame and per-set parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory for every output file.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exceedance curve and deadline-miss probability of one or more frames.
    Analyze(AnalyzeArgs),
    /// Monte Carlo simulation of the critical instant.
    Simulate(SimulateArgs),
    /// Mean squared error and largest gap between exceedance curves.
    Compare(CompareArgs),
    /// Random message sets at a target utilization.
    Generate(GenerateArgs),
    /// Wall-clock comparison of the improved and legacy analyses.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Improved,
    Legacy,
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BlockingArg {
    LowerPriority,
    IncludingSelf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimBlockingArg {
    WorstCase,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JitterArg {
    Off,
    Uniform,
}

/// Message set, error-model overrides and frame selection.
#[derive(Debug, Clone, Args)]
pub struct SetArgs {
    /// Built-in dataset name (sae, example3) or path to a message-set JSON file.
    #[arg(long)]
    pub set: String,
    /// Frame id to analyze.
    #[arg(long, group = "target")]
    pub frame: Option<String>,
    /// Analyze the lowest-priority frame.
    #[arg(long, group = "target")]
    pub lowest_priority: bool,
    /// Analyze every frame.
    #[arg(long, group = "target")]
    pub all: bool,
    /// Poisson error rate per bit; replaces the set's rate and drops any
    /// per-frame retry distributions.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Smallest retry limit whose neglected probability is below this.
    #[arg(long, conflicts_with = "retry_limit")]
    pub retry_threshold: Option<f64>,
    /// Fixed retry limit.
    #[arg(long)]
    pub retry_limit: Option<u32>,
    #[arg(long, value_enum, default_value = "lower-priority")]
    pub blocking: BlockingArg,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub set: SetArgs,
    #[arg(long, value_enum, default_value = "improved")]
    pub method: MethodArg,
    /// Stopping threshold; defaults to 2.7e-15 for sae and 1e-12 otherwise.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Iteration horizon in bit-times.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Deterministic method only: charge every frame its retry limit.
    #[arg(long)]
    pub with_errors: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub set: SetArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leading instances to record; defaults to the count the improved
    /// analysis enumerates.
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long, value_enum, default_value = "worst-case")]
    pub blocking_mode: SimBlockingArg,
    #[arg(long, value_enum, default_value = "off")]
    pub jitter: JitterArg,
    /// Stopping threshold of the analysis used to size `--instances`.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Simulated time per sample after which the run is abandoned.
    #[arg(long)]
    pub horizon: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Exceedance CSV files; every pair is compared.
    #[arg(required = true, num_args = 2..)]
    pub curves: Vec<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Evaluation range in ms, as `lo:hi`.
    #[arg(long, default_value = "0:60")]
    pub range: String,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "compare.json")]
    pub output: String,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub utilization: f64,
    #[arg(long, default_value_t = 50)]
    pub sets: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Period range in ms, as `lo:hi`.
    #[arg(long, default_value = "10:1000")]
    pub periods: String,
    /// Transmission-time range in bits, as `lo:hi`.
    #[arg(long, default_value = "55:135")]
    pub transmission: String,
    /// Jitter range as a fraction of the period, as `lo:hi`.
    #[arg(long, default_value = "0:0.1")]
    pub jitter: String,
    /// Deadline as a fraction of the period.
    #[arg(long, default_value_t = 1.0)]
    pub deadline_fraction: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2.7e-15)]
    pub retry_threshold: f64,
    #[arg(long, default_value_t = 13)]
    pub error_overhead: u64,
    #[arg(long, default_value_t = 125_000)]
    pub bus_speed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of message-set JSON files to time.
    #[arg(long, conflicts_with = "utilization")]
    pub dir: Option<PathBuf>,
    /// Generate sets instead: one utilization or a sweep `lo:hi`.
    #[arg(long)]
    pub utilization: Option<String>,
    /// Sweep step.
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub sets: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-12)]
    pub epsilon: f64,
    /// Runs per analysis; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // A second initialization within one process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    std::fs::create_dir_all(&cli.out_dir).map_err(CliError::io(&cli.out_dir))?;
    match &cli.command {
        Command::Analyze(args) => commands::analyze(&cli, args),
        Command::Simulate(args) => commands::simulate(&cli, args),
        Command::Compare(args) => commands::compare(&cli, args),
        Command::Generate(args) => commands::generate(&cli, args),
        Command::Bench(args) => commands::bench(&cli, args),
    }
}
