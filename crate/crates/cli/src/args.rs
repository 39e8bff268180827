//! Command-line flags. Every struct is serialised verbatim into the run
//! manifest.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "hetgen", version, about = "Generate heterogeneous graphs with node features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic benchmark corpus.
    MakeSynthetic(MakeSyntheticArgs),
    /// Tag graphs train/val/test, optionally after cutting a large graph by
    /// node categories.
    Split(SplitArgs),
    /// Harvest per-type feature pools from the training split.
    Pools(PoolsArgs),
    /// Train the skeleton diffusion model.
    TrainPhase1(TrainPhase1Args),
    /// Sample skeletons from a trained diffusion model.
    SampleSkeletons(SampleSkeletonsArgs),
    /// Train the feature-assignment GAN.
    TrainPhase2(TrainPhase2Args),
    /// Assign features to skeletons with a trained GAN.
    Generate(GenerateArgs),
    /// Compare generated graphs with real ones.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MakeSyntheticArgs {
    /// planted-pools, two-families or tiny-imdb-like.
    #[arg(long)]
    pub profile: String,
    #[arg(long)]
    pub seed: u64,
    /// Number of graphs (per family for two-families); profile default otherwise.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Category table; the corpus must then hold exactly one graph.
    #[arg(long, requires = "keys")]
    pub categories: Option<PathBuf>,
    /// Comma-separated category keys.
    #[arg(long, value_delimiter = ',', requires = "categories")]
    pub keys: Vec<String>,
    /// Components larger than this are dropped.
    #[arg(long, default_value_t = 200)]
    pub max_nodes: usize,
    #[arg(long, default_value_t = 0.72)]
    pub train: f64,
    #[arg(long, default_value_t = 0.08)]
    pub val: f64,
    #[arg(long, default_value_t = 0.20)]
    pub test: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PoolsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainPhase1Args {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Diffusion steps.
    #[arg(long = "T", default_value_t = 50)]
    #[serde(rename = "T")]
    pub steps: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleSkeletonsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainPhase2Args {
    /// Split-tagged corpus; real graphs and pools come from its train split.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Phase-1 skeletons the generator is trained on.
    #[arg(long, required_unless_present = "real_skeletons")]
    pub skeletons: Option<PathBuf>,
    /// Train on the skeletons of the real training graphs instead.
    #[arg(long, conflicts_with = "skeletons")]
    pub real_skeletons: bool,
    #[arg(long)]
    pub no_mp: bool,
    #[arg(long)]
    pub no_pool: bool,
    /// Generator minimises -log D instead of log(1 - D).
    #[arg(long)]
    pub nonsaturating: bool,
    #[arg(long, default_value_t = 300)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub d_steps: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = OptimizerKind::Sgd)]
    pub optimizer: OptimizerKind,
    #[arg(long, default_value_t = 0.05)]
    pub g_lr: f64,
    #[arg(long, default_value_t = 0.05)]
    pub d_lr: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau_start: f64,
    #[arg(long, default_value_t = 0.5)]
    pub tau_end: f64,
    /// Checkpoint-selection interval in steps; 0 keeps the final generator.
    #[arg(long, default_value_t = 50)]
    pub select_every: usize,
    #[arg(long, default_value_t = 1.0)]
    pub real_label: f64,
    #[arg(long, default_value_t = 0.0)]
    pub instance_noise: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub gan: PathBuf,
    #[arg(long)]
    pub skeletons: PathBuf,
    /// Use the first `count` skeletons; all of them by default.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitChoice {
    All,
    Train,
    Val,
    Test,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub real: PathBuf,
    /// Which tagged split of the real corpus to compare against.
    #[arg(long, value_enum, default_value_t = SplitChoice::All)]
    pub real_split: SplitChoice,
    #[arg(long)]
    pub gen: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "degree,clust,spectral,typedeg,femd")]
    pub metrics: Vec<String>,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Pools file supplying the missing-type penalties; derived from the
    /// real graphs otherwise.
    #[arg(long)]
    pub pools: Option<PathBuf>,
    /// Gaussian-kernel bandwidth.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100)]
    pub clustering_bins: usize,
    #[arg(long, default_value_t = 64)]
    pub spectral_bins: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}
