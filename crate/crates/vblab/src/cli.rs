use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "vblab",
    version,
    about = "Variational-Bayes fixed-point fits, diagnostics and sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a dataset (`index,y` CSV plus a JSON sidecar)
    Simulate(CommonArgs),
    /// Run the fixed-point iteration on a dataset
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Jacobian, PSD bound, large-sample limits and Laplace spot checks
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        mc: MonteCarloArgs,
    },
    /// Distance of the posterior from its normal limit across `--n`
    Normality {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: NormalityArgs,
    },
    /// Fits over every (n, seed) cell with aggregate statistics
    Sweep(CommonArgs),
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// JSON config file with a `schema_version` field
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// A, B, C, generic (Gauss-Hermite form of B) or generic-A
    #[arg(long)]
    pub model: Option<String>,
    /// True parameter, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta_star: Option<Vec<f64>>,
    /// Sample size, or a comma-separated grid
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Seed, or a comma-separated list
    #[arg(long = "seeds", visible_alias = "seed", value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha0: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta0: Option<Vec<f64>>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Starting point, comma-separated, or `default`
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<String>,
    /// Output directory
    #[arg(long = "out")]
    pub out: Option<PathBuf>,
    /// Worker threads for sweep cells
    #[arg(long, env = "VBLAB_JOBS")]
    pub jobs: Option<usize>,
    /// Record wall-clock time in reports (breaks byte-for-byte reproducibility)
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Debug, Default, Clone)]
pub struct DataArgs {
    /// Dataset CSV; defaults to `dataset.csv` in the output directory
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct MonteCarloArgs {
    #[arg(long, default_value_t = vblab_core::asymptotics::DEFAULT_MC_SAMPLES)]
    pub mc_samples: usize,
    /// Sample size for the large-sample limit checks
    #[arg(long, default_value_t = 10_000)]
    pub limits_n: usize,
}

#[derive(Args, Debug, Clone)]
pub struct NormalityArgs {
    /// Concentration ball radius
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Smoothness ball radius
    #[arg(long, default_value_t = 0.1)]
    pub eps_ball: f64,
    /// Simpson points per axis
    #[arg(long, default_value_t = 4097)]
    pub grid_points: usize,
    /// Points per axis of the plotting grid
    #[arg(long, default_value_t = 401)]
    pub density_points: usize,
}
