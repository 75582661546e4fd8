use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Anisotropic repulsive mixtures of latent factor models.
///
/// Every option can also be set in a config file passed with `--config`:
/// one `key = value` per line, keys spelled like the long options with `_`
/// or `-`, `#` starting a comment. Keys before the first `[section]` header
/// apply to every command; keys under `[simulate]`, `[fit]`, `[diagnose]`
/// or `[score]` apply to that command only. Command-line flags override the
/// file.
#[derive(Debug, Parser)]
#[command(name = "applam", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and its true labels.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler on a dataset.
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Export pair correlation grids and prior draws of the DPP.
    #[command(args_override_self = true)]
    Diagnose(DiagnoseArgs),
    /// Summarize a saved trace against true labels.
    #[command(args_override_self = true)]
    Score(ScoreArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Diagnose(_) => "diagnose",
            Command::Score(_) => "score",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    WhittleMatern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Pca,
    Prior,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Config file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// A: Gaussian scores with t observation noise; B: t scores.
    #[arg(long, value_enum, default_value = "a")]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    #[arg(long, default_value_t = 50)]
    pub n_per_cluster: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Data CSV: n rows, p columns, no header.
    #[arg(long, default_value = "data.csv")]
    pub out_data: PathBuf,
    /// True labels, one 1-based integer per line.
    #[arg(long, default_value = "labels.csv")]
    pub out_labels: PathBuf,
}

/// DPP prior on the mixture locations.
#[derive(Debug, Args)]
pub struct DppArgs {
    /// Intensity: the expected number of components.
    #[arg(long, default_value_t = 10.0)]
    pub rho: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    /// Gaussian-like scale; defaults to the value giving rho = rho_max / 2.
    #[arg(long)]
    pub c: Option<f64>,
    /// Whittle-Matern range.
    #[arg(long, default_value_t = 0.1)]
    pub wm_alpha: f64,
    /// Whittle-Matern smoothness.
    #[arg(long, default_value_t = 1.0)]
    pub wm_nu: f64,
    /// Spectral truncation: frequencies in {-N..N}^d.
    #[arg(long, default_value_t = applam::dpp::DEFAULT_TRUNCATION)]
    pub trunc_n: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Data CSV without header; 0/1 entries in binary mode.
    #[arg(long)]
    pub data: PathBuf,
    /// Optional true labels; adds ARI statistics to the summary.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "continuous")]
    pub mode: ModeArg,
    /// Latent dimension.
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    #[command(flatten)]
    pub dpp: DppArgs,
    /// Half-width of the cubic region; elicited from the data when absent.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Prior loadings draws used to elicit the region.
    #[arg(long, default_value_t = 100)]
    pub elicit_draws: usize,
    /// Standardize columns before fitting (continuous mode).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub standardize: bool,
    /// Gamma shape of the component weights.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Inverse-Wishart degrees of freedom; defaults to d + 50.
    #[arg(long)]
    pub nu0: Option<f64>,
    /// Inverse-Wishart scale multiple of the identity.
    #[arg(long, default_value_t = 20.0)]
    pub psi0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a_sigma: f64,
    #[arg(long, default_value_t = 0.3)]
    pub b_sigma: f64,
    /// Dirichlet-Laplace concentration.
    #[arg(long, default_value_t = 0.5)]
    pub a_dl: f64,
    #[arg(long, default_value_t = 2000)]
    pub n_burn: usize,
    #[arg(long, default_value_t = 4000)]
    pub n_save: usize,
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    /// Initial MALA step.
    #[arg(long, default_value_t = 1e-9)]
    pub mala_step: f64,
    /// Adapt the MALA step during burn-in.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub tune_mala: bool,
    /// Adapt the center random-walk scale during burn-in.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub tune_mu: bool,
    /// Precondition MALA with the Gaussian part of the loadings precision.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub mala_precondition: bool,
    #[arg(long, value_enum, default_value = "pca")]
    pub init_loadings: InitArg,
    /// Birth-death moves per sweep.
    #[arg(long, default_value_t = 10)]
    pub bd_steps: usize,
    /// Initial center random-walk scale as a fraction of the region width.
    #[arg(long, default_value_t = 0.02)]
    pub mu_step_frac: f64,
    #[arg(long, default_value_t = 1)]
    pub n_chains: usize,
    /// Credible level of the ARI interval.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Loadings, rows separated by `;` and entries by `,`, e.g. "1,0;0,0.5".
    #[arg(long, default_value = "1,0;0,0.5")]
    pub lambda: String,
    #[command(flatten)]
    pub dpp: DppArgs,
    /// Half-width of the cubic region for prior draws.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub grid_lo: f64,
    #[arg(long, default_value_t = 2.0)]
    pub grid_hi: f64,
    /// Points per axis of the pair correlation grid.
    #[arg(long, default_value_t = 41)]
    pub grid_n: usize,
    /// Number of prior draws to export; 0 skips them.
    #[arg(long, default_value_t = 0)]
    pub prior_draws: usize,
    #[arg(long, default_value = "diagnose")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trace CSV written by `fit`.
    #[arg(long)]
    pub trace: PathBuf,
    /// True labels, one integer per line.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Per-observation log-likelihood CSV written by `fit`, for WAIC.
    #[arg(long)]
    pub loglik: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "summary.json")]
    pub out: PathBuf,
}
