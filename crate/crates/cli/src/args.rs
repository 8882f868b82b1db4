use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use setpar::estimation::ModelKind;

use crate::config::{FitOptions, LambdaInitSpec};

/// Simulate, fit and diagnose self-excited threshold Poisson
/// autoregressions for count time series.
#[derive(Debug, Parser)]
#[command(name = "setpar", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a series; writes `t,y,lambda`.
    Simulate(SimulateArgs),
    /// Fit a model by threshold-grid maximum likelihood.
    Fit(FitArgs),
    /// Residual and autocorrelation tables for a fitted model.
    Diagnose(DiagnoseArgs),
    /// One-step forecasts over a held-out stretch.
    Forecast(ForecastArgs),
    /// Monte Carlo study of the estimator.
    Mc(McArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Par,
    Setpar,
    #[value(name = "setpar-b2zero")]
    SetparB2Zero,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Par => ModelKind::Par,
            ModelArg::Setpar => ModelKind::Setpar,
            ModelArg::SetparB2Zero => ModelKind::SetparB2Zero,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Count file: one count per line, or delimited text with --column.
    #[arg(long)]
    pub data: PathBuf,
    /// Header name of the count column.
    #[arg(long)]
    pub column: Option<String>,
    /// Use only the first N observations.
    #[arg(long, value_name = "N")]
    pub head: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Flags take precedence over the configuration file.
#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Result document (TOML).
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Lower quantile level of the threshold grid.
    #[arg(long)]
    pub alpha1: Option<f64>,
    /// Upper quantile level of the threshold grid.
    #[arg(long)]
    pub alpha2: Option<f64>,
    /// Explicit threshold candidates, replacing the quantile grid.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub thresholds: Option<Vec<u64>>,
    /// Initial intensity: `mean`, `first` or a positive number.
    #[arg(long)]
    pub lambda_init: Option<LambdaInitSpec>,
}

impl FitArgs {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            thresholds: self.thresholds.clone(),
            lambda_init: self.lambda_init,
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Result document written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Directory for the output tables.
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Largest autocorrelation lag, capped at n − 1.
    #[arg(long, default_value_t = 20)]
    pub max_lag: usize,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Result document written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Counts the recursion runs through before forecasting.
    #[arg(long)]
    pub history: PathBuf,
    /// Realized counts to forecast one step ahead.
    #[arg(long)]
    pub future: PathBuf,
    /// Header name of the count column in both files.
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Summary table, one row per sample size and statistic.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Per-replication table.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}
