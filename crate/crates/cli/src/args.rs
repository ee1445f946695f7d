use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "csmark", version, about = "Bayesian histogram estimation for current-status data with a continuous mark")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Plain `key=value` file whose entries act as default flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "lowercase")]
pub enum Command {
    /// Simulate a current-status dataset from the reference model.
    Simulate(SimulateArgs),
    /// Fit one prior to a dataset by MCMC.
    Fit(FitArgs),
    /// Wasserstein distance between an estimate and the truth.
    Evaluate(EvaluateArgs),
    /// Monte-Carlo study over sample sizes, replications and priors.
    Mc(McArgs),
    /// Greyscale PGM image of a bin-weight CSV.
    Heatmap(HeatmapArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorArg {
    Lngl,
    Dirichlet,
}

impl PriorArg {
    pub fn name(self) -> &'static str {
        match self {
            PriorArg::Lngl => "lngl",
            PriorArg::Dirichlet => "dirichlet",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 25)]
    pub bins_x: usize,
    #[arg(long, default_value_t = 50)]
    pub bins_y: usize,
    /// Upper end of the event-time axis.
    #[arg(long, default_value_t = 1.0)]
    pub m1: f64,
    /// Upper end of the mark axis.
    #[arg(long, default_value_t = 2.0)]
    pub m2: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 20_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub burnin_frac: f64,
    #[arg(long, default_value_t = 0.95)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Rate of the exponential prior on tau.
    #[arg(long, default_value_t = 1.0)]
    pub tau_rate: f64,
    /// Pick rho and delta by pilot runs before the main chain.
    #[arg(long)]
    pub tune: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weight of the unreflected mixture component.
    #[arg(long, default_value_t = 0.3)]
    pub mix_weight: f64,
    /// Also write the latent (x, y, t) records to truth.csv.
    #[arg(long)]
    pub truth: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub prior: PriorArg,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Estimated bin weights (grid CSV); its shape fixes the grid.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Reference weights on the same grid; defaults to the exact bin masses
    /// of the simulation density.
    #[arg(long, conflicts_with = "truth_sample")]
    pub truth_weights: Option<PathBuf>,
    /// Latent truth records (x, y, t), binned into empirical masses.
    #[arg(long)]
    pub truth_sample: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub m1: f64,
    #[arg(long, default_value_t = 2.0)]
    pub m2: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct McArgs {
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "100,250,500")]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lngl,dirichlet")]
    pub priors: Vec<PriorArg>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct HeatmapArgs {
    /// Bin-weight CSV to draw.
    #[arg(long)]
    pub weights: PathBuf,
    /// Side of the square pixel block drawn per bin.
    #[arg(long, default_value_t = 8)]
    pub block: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// A manifest.json or meta.json written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write; defaults to the recorded output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
