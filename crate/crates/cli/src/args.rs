use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "ngmoe", version, about = "Shrinkage mixture-of-experts: simulate, fit, identify, marginal likelihood, studies")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// TOML file whose keys override the command-line options.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a simulation-study dataset.
    #[command(after_help = "Writes responses.csv, covariates.csv, truth.csv (true gating coefficients, one row per non-baseline group), labels.csv (study 2, 1-based) and manifest.json.")]
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler on a dataset.
    #[command(after_help = "Writes draws/ (draws.csv with columns draw, perm_k, beta_g_c, lambda_g and tau2_g_c or delta_g_c, component features with a _k suffix; labels.csv; draws_manifest.json), identified/ with --identify, summary.csv (parameter, mean, sd, q025, q500, q975), fit.json and manifest.json.")]
    Fit(FitArgs),
    /// Relabel saved draws by k-means on the point process.
    Identify(IdentifyArgs),
    /// Bridge-sampling marginal likelihoods and log Bayes factors over K.
    #[command(after_help = "Writes marglik.csv (k, log_ml, log_bf, se_proxy, converged, iterations, start_log_ml_is, start_log_ml_ris) and log_bf_plot.csv (k, log_bf); with --oracle bernoulli-k1, oracle.csv (analytic, estimate, difference, iterations, converged).")]
    Marglik(MarglikArgs),
    /// Run a simulation study and write the comparison tables.
    #[command(after_help = "Writes replications.csv, aggregate.csv (RMSEs relative to the NG prior when it is included, then absolute values), log_bf.csv with --bf-k-range, and study.json.")]
    Study(StudyArgs),
    /// Re-run a command from its manifest.json.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// 1 (logit gating only) or 2 (Gaussian mixture of experts).
    #[arg(long, default_value_t = 2)]
    pub study: u8,
    /// well-separated, overlapping, high-sparsity or complex-sparsity (study 2).
    #[arg(long)]
    pub scenario: Option<String>,
    /// Number of observations (default 300).
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "sim")]
    pub out: PathBuf,
}

/// Data files and model options shared by `fit` and `marglik`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// CSV with a header row, one column per response.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    /// CSV with a header row; the first column must be all ones unless
    /// --add-intercept is given.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Prepend an intercept column to the covariates.
    #[arg(long, default_value_t = false)]
    pub add_intercept: bool,
    /// bernoulli or gaussian.
    #[arg(long, default_value = "bernoulli")]
    pub family: String,
    /// Gating prior: ng, ssvs or flat.
    #[arg(long, default_value = "ng")]
    pub prior: String,
    /// NG shape θ.
    #[arg(long, default_value_t = 0.1)]
    pub theta: f64,
    /// NG global-scale hyperparameters.
    #[arg(long, default_value_t = 0.01)]
    pub c0: f64,
    #[arg(long, default_value_t = 0.01)]
    pub c1: f64,
    /// SSVS spike and slab variances and inclusion probability.
    #[arg(long, default_value_t = 0.01)]
    pub spike: f64,
    #[arg(long, default_value_t = 1.0)]
    pub slab: f64,
    #[arg(long, default_value_t = 0.5)]
    pub incl_prob: f64,
    /// Variance of the flat normal prior.
    #[arg(long, default_value_t = 10.0)]
    pub flat_var: f64,
    #[arg(long, default_value_t = 1000)]
    pub burn: usize,
    #[arg(long, default_value_t = 5000)]
    pub save: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Number of importance snapshots kept for bridge sampling.
    #[arg(long, default_value_t = 100)]
    pub snapshots: usize,
    /// Disable the random permutation step.
    #[arg(long, default_value_t = false)]
    pub no_permute: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Number of components.
    #[arg(long, short = 'k', default_value_t = 2)]
    pub k: usize,
    /// Relabel the draws after sampling.
    #[arg(long, default_value_t = false)]
    pub identify: bool,
    /// Comma-separated identification features (e.g. gamma_1,gamma_3).
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long, default_value = "fit")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IdentifyArgs {
    /// Directory written by `fit` (containing draws_manifest.json).
    #[arg(long)]
    pub draws: Option<PathBuf>,
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "identified")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MarglikArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Inclusive range `lo:hi` or comma list of K values.
    #[arg(long, default_value = "1:4")]
    pub k_range: String,
    /// Reference K for the log Bayes factors (default: smallest K).
    #[arg(long = "ref")]
    pub reference: Option<usize>,
    /// Number of importance draws L (default: number of saved draws).
    #[arg(long)]
    pub importance: Option<usize>,
    /// `bernoulli-k1`: compare the K=1 estimate with the closed form.
    #[arg(long)]
    pub oracle: Option<String>,
    #[arg(long, default_value = "marglik")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct StudyArgs {
    /// 1 or 2.
    #[arg(long)]
    pub id: Option<u8>,
    /// Observations per dataset in study 1.
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    /// Study 2 scenario.
    #[arg(long, default_value = "well-separated")]
    pub scenario: String,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Comma-separated subset of standard,ssvs,ng.
    #[arg(long, default_value = "standard,ssvs,ng")]
    pub priors: String,
    #[arg(long, default_value_t = 1000)]
    pub burn: usize,
    #[arg(long, default_value_t = 5000)]
    pub save: usize,
    #[arg(long, default_value_t = 100)]
    pub snapshots: usize,
    #[arg(long, default_value_t = 0.1)]
    pub theta: f64,
    /// Study 2 only: K range for Bayes factors against K = 4.
    #[arg(long)]
    pub bf_k_range: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "study")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// manifest.json of an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the re-run (default: the original one).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
