use std::path::PathBuf;

use amtl_core::model::{LossKind, Regularizer};
use amtl_core::runtime::{Clock, Mode};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "amtl", version, about = "Asynchronous multi-task learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic low-rank dataset as a CSV task directory.
    Gen(GenArgs),
    /// Run one engine and export its trace.
    Run(RunArgs),
    /// Run AMTL and SMTL on the same problem and compare them.
    Compare(CompareArgs),
    /// Sweep one problem axis with matched AMTL/SMTL pairs.
    Bench(BenchArgs),
    /// Quick numerical sanity checks.
    Selftest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    Squared,
    Logistic,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Squared => LossKind::Squared,
            LossArg::Logistic => LossKind::Logistic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RegArg {
    Nuclear,
    L21,
}

impl From<RegArg> for Regularizer {
    fn from(r: RegArg) -> Self {
        match r {
            RegArg::Nuclear => Regularizer::NuclearNorm,
            RegArg::L21 => Regularizer::L21,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Amtl,
    Smtl,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Amtl => Mode::Amtl,
            ModeArg::Smtl => Mode::Smtl,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClockArg {
    Virtual,
    Real,
}

impl From<ClockArg> for Clock {
    fn from(c: ClockArg) -> Self {
        match c {
            ClockArg::Virtual => Clock::Virtual,
            ClockArg::Real => Clock::Real,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Tasks,
    Samples,
    Dim,
}

/// Shape of a generated problem.
#[derive(Debug, Clone, Args)]
pub struct SyntheticArgs {
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub tasks: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    /// Rank of the true model [default: ceil(min(dim, tasks) / 5)]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub rank: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = LossArg::Squared)]
    pub loss: LossArg,
    #[arg(long, value_enum, default_value_t = RegArg::Nuclear)]
    pub regularizer: RegArg,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Solver, delay and cost settings shared by run, compare and bench.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Regularization weight [default: 1.0, or the dataset manifest's value]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Seed for the delay streams and, unless --data-seed is given, the data.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub iterations: u64,
    /// Constant part of each communication delay, in seconds.
    #[arg(long, default_value_t = 5.0)]
    pub offset: f64,
    /// Scale of the uniform delay jitter, in seconds [default: same as --offset]
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Relaxation constant in (0, 1).
    #[arg(long, default_value_t = 0.9)]
    pub c: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub eta_min: f64,
    /// Operator step as a multiple of 1/L; must lie in (0, 2).
    #[arg(long, default_value_t = 1.0)]
    pub eta_scale: f64,
    /// Staleness bound in updates [default: 2 * tasks]
    #[arg(long)]
    pub tau_max: Option<usize>,
    /// Scale the relaxation step by log10 of the recent mean delay.
    #[arg(long)]
    pub dynamic_step: bool,
    /// Number of recent delays averaged by --dynamic-step.
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    /// Task whose delays are multiplied by --slow-factor.
    #[arg(long)]
    pub slow_task: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    pub slow_factor: f64,
    /// Record the objective every this many updates [default: tasks]
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Simulated seconds per flop of a task gradient.
    #[arg(long, default_value_t = 1e-8)]
    pub kappa: f64,
    /// Simulated seconds per flop of the server's proximal step.
    #[arg(long, default_value_t = 1e-8)]
    pub kappa_svd: f64,
    /// Wall seconds per simulated delay second with --clock real.
    #[arg(long, default_value_t = 1e-3)]
    pub time_scale: f64,
    #[arg(long, value_enum, default_value_t = ClockArg::Virtual)]
    pub clock: ClockArg,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// CSV task directory; when absent a synthetic problem is generated.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Amtl)]
    pub mode: ModeArg,
    /// Directory for events.csv and summary.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated sweep values, e.g. 5,10,15.
    #[arg(long, required = true, value_delimiter = ',', num_args = 1..,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub values: Vec<u64>,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}
