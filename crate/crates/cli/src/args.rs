use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "svmcut", version, about = "Cutting-plane solvers for sparse linear SVMs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem and write the solution and a metrics record.
    Solve(SolveArgs),
    /// Solve along a geometric grid of lambda values.
    Path(PathArgs),
    /// Run a method matrix over replications and print an ARA table.
    Bench(BenchArgs),
    /// Write a synthetic dataset in svmlight format.
    Synth(SynthArgs),
    /// Recompute the objective of a solution file.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    L1,
    Group,
    Slope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Full,
    Colgen,
    Congen,
    Colcon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Init {
    Random,
    Corr,
    Fo,
    Sfo,
    Path,
}

macro_rules! from_str_via_value_enum {
    ($($t:ty),*) => {$(
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                <$t as ValueEnum>::from_str(s, true)
            }
        }
        impl $t {
            pub fn name(self) -> String {
                self.to_possible_value().expect("no skipped variants").get_name().to_string()
            }
        }
    )*};
}

from_str_via_value_enum!(Model, Strategy, Init);

/// Flags that describe the optimization problem.
#[derive(Debug, Clone, Default, Args)]
pub struct ProblemArgs {
    /// Plain key=value file with defaults for any long flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<Model>,
    /// svmlight file, or CSV when the name ends in `.csv`.
    #[arg(long, conflicts_with = "synth")]
    pub data: Option<PathBuf>,
    /// Synthetic instance, e.g. `n=100,p=2000,k0=10,rho=0.1[,groups=200x10][,standardize=true]`.
    #[arg(long)]
    pub synth: Option<String>,
    /// Feature count override for svmlight input.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Group file: one line per group of 0-based feature indices.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// `two-level:K0`, `bh-log`, or a file with one weight per line.
    #[arg(long)]
    pub slope_weights: Option<String>,
    /// Absolute regularization level.
    #[arg(long, conflicts_with = "lambda_frac")]
    pub lambda: Option<f64>,
    /// Regularization level as a fraction of lambda_max (default 0.01).
    #[arg(long)]
    pub lambda_frac: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Flags that control a cutting-plane run.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub init: Option<Init>,
    /// Pricing tolerance.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Initial columns (or groups) for the random, corr and path inits.
    #[arg(long)]
    pub init_size: Option<usize>,
    /// Initial samples for the random, corr and path inits.
    #[arg(long)]
    pub init_rows: Option<usize>,
    /// Most columns (or groups) taken from a first-order fit.
    #[arg(long)]
    pub init_cap: Option<usize>,
    #[arg(long)]
    pub max_outer: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Solution file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Metrics file (JSON lines, appended). Defaults to stdout.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Grid length.
    #[arg(long)]
    pub points: Option<usize>,
    /// Common ratio of the grid.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Directory for one solution file per grid point.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated `strategy[:epsilon]` list.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Solve a grid of this many points per replication instead of one lambda.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Concurrent replications.
    #[arg(long, env = "SVMCUT_JOBS")]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Build the table from an existing metrics file instead of solving.
    #[arg(long, conflicts_with_all = ["methods", "reps", "points"])]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Same syntax as `--synth`.
    #[arg(long)]
    pub spec: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// svmlight output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Group file, written for grouped specs.
    #[arg(long)]
    pub groups_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Solution file to score.
    #[arg(long)]
    pub solution: PathBuf,
}
