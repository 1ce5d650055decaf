use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "tcadetect",
    version,
    about = "Wideband signal detection on coupled antenna arrays"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic vs Monte Carlo distributions of each detector under H0 and H1.
    Dist(RunArgs),
    /// ROC curves from the exact laws.
    Roc(RunArgs),
    /// Detection probability versus theta_k at a fixed false-alarm rate.
    Sweep(RunArgs),
    /// Check a config file without running anything.
    Validate(ValidateArgs),
    /// Evaluate a generalized chi-square CDF or quantile.
    Gx2(Gx2Args),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0: one per core).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub no_plots: bool,
    /// Dotted-path overrides, e.g. `grid.K=5 signal.theta_k=0.3`.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct Gx2Args {
    /// Comma-separated term weights.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub weights: Vec<f64>,
    /// Degrees of freedom per term (default 1 each).
    #[arg(long, value_delimiter = ',')]
    pub dofs: Vec<u32>,
    /// Non-centralities per term (default 0 each).
    #[arg(long, value_delimiter = ',')]
    pub noncentralities: Vec<f64>,
    /// Mean of an added normal component.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub normal_mean: f64,
    /// Variance of an added normal component.
    #[arg(long, default_value_t = 0.0)]
    pub normal_variance: f64,
    /// Points at which to evaluate the CDF.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x: Vec<f64>,
    /// Probabilities at which to evaluate the quantile.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
}
