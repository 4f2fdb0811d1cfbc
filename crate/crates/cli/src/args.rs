use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "trialgen",
    version,
    about = "Transport trial effects to a target population and bound omitted-moderator bias"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "OVB_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the transported effect and run the sensitivity analysis.
    Analyze(AnalyzeArgs),
    /// Monte Carlo coverage study on a simulation design.
    Simulate(SimulateArgs),
    /// Leave-one-covariate-out benchmarks against the robustness value.
    Benchmark(BenchmarkArgs),
    /// Bias bound over a grid of the two partial R² values.
    Contour(ContourArgs),
    /// Write one simulated trial/target pair with its oracle.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Gformula,
    Ipw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnerArg {
    Ols,
    Ridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum R2MethodArg {
    Lpm,
    Mcfadden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DgpArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "hide-one")]
    HideOne,
}

impl DgpArg {
    pub fn as_str(self) -> &'static str {
        match self {
            DgpArg::One => "1",
            DgpArg::Two => "2",
            DgpArg::Three => "3",
            DgpArg::HideOne => "hide-one",
        }
    }
}

/// Input tables and column roles shared by `analyze` and `benchmark`.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Trial CSV: covariates, treatment and outcome columns.
    #[arg(long)]
    pub trial: PathBuf,
    /// Target CSV: covariate columns only.
    #[arg(long)]
    pub target: PathBuf,
    /// Treatment column (0/1).
    #[arg(long)]
    pub treatment: Option<String>,
    /// Outcome column.
    #[arg(long)]
    pub outcome: Option<String>,
    /// Covariate columns (default: every other trial column).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Categorical columns to expand into indicators.
    #[arg(long = "one-hot", value_delimiter = ',')]
    pub one_hot: Vec<String>,
}

/// Outcome-model and selection-model choices.
#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "gformula")]
    pub estimator: EstimatorArg,
    /// Outcome learner for the g-formula.
    #[arg(long, value_enum, default_value = "ols")]
    pub learner: LearnerArg,
    #[arg(long, default_value_t = 1.0)]
    pub ridge_penalty: f64,
    /// Cap on inverse-odds weights.
    #[arg(long, default_value_t = 50.0)]
    pub weight_clip: f64,
    /// How R² of selection on the covariates is measured.
    #[arg(long = "r2-s-x-method", value_enum, default_value = "lpm")]
    pub r2_s_x_method: R2MethodArg,
    /// Residual effect heterogeneity σ_τ|X; several values give a curve.
    /// Default: the residual-variance upper bound.
    #[arg(long = "sigma-tau", value_delimiter = ',', allow_hyphen_values = true)]
    pub sigma_tau: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Moderation-strength bounds Γ for the raw bound.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gamma: Vec<f64>,
    /// Imbalance bounds Λ for the raw bound.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Vec<f64>,
    /// Effect partial R² values for the partial-R² bound.
    #[arg(long = "r2-tau", value_delimiter = ',', allow_hyphen_values = true)]
    pub r2_tau: Vec<f64>,
    /// Selection partial R² values for the partial-R² bound.
    #[arg(long = "r2-s", value_delimiter = ',', allow_hyphen_values = true)]
    pub r2_s: Vec<f64>,
    /// Bootstrap resamples.
    #[arg(long, default_value_t = 1000)]
    pub boot: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write envelope.csv.
    #[arg(long)]
    pub envelope: bool,
    /// Also write contour.csv.
    #[arg(long)]
    pub contour: bool,
    #[arg(long, default_value_t = 101)]
    pub resolution: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub dgp: DgpArg,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(
        long = "gamma-grid",
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0,0.25,0.5,0.75,1"
    )]
    pub gamma_grid: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub boot: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "ols")]
    pub learner: LearnerArg,
    #[arg(long, default_value_t = 1.0)]
    pub ridge_penalty: f64,
    #[arg(long)]
    pub n_trial: Option<usize>,
    #[arg(long)]
    pub n_target: Option<usize>,
    #[arg(long)]
    pub mu_shift: Option<f64>,
    #[arg(long)]
    pub gamma_r: Option<f64>,
    #[arg(long)]
    pub gamma_o: Option<f64>,
    #[arg(long)]
    pub beta_u: Option<f64>,
    #[arg(long)]
    pub beta_base: Option<f64>,
    #[arg(long)]
    pub beta_mod: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Hidden covariate index for the hide-one design.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Robustness value to compare against (default: sign-reversal RV of the data).
    #[arg(long)]
    pub rv: Option<f64>,
    /// Treat this covariate as unobserved and bound the resulting bias.
    #[arg(long)]
    pub hide: Option<String>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    #[arg(long = "sigma-tau")]
    pub sigma_tau: f64,
    #[arg(long = "var-s")]
    pub var_s: f64,
    #[arg(long = "r2-s-x")]
    pub r2_s_x: f64,
    #[arg(long = "tau-x", allow_hyphen_values = true)]
    pub tau_x: f64,
    #[arg(long, default_value_t = 101)]
    pub resolution: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub dgp: DgpArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n_trial: Option<usize>,
    #[arg(long)]
    pub n_target: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}
