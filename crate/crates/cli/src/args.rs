use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crawl_core::expressiveness::DEFAULT_BUDGET;

#[derive(Debug, Parser)]
#[command(name = "crawl", version, about = "Random-walk convolutional networks for graphs")]
pub struct Cli {
    /// Root seed; overrides the `seed` of a training configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a dataset or a pair of gadget graphs as JSON.
    Gen {
        #[command(subcommand)]
        what: GenTarget,
    },
    /// Train with the k-fold protocol and write checkpoints and metrics.
    Train(RunArgs),
    /// Score a checkpoint on a dataset under several walk seeds.
    Eval(EvalArgs),
    /// Train every combination of structural encodings and walk strategy.
    Ablate(RunArgs),
    /// Compare the walk feature distributions of two graphs.
    Distinguish(DistinguishArgs),
    /// Check every analytic gradient against central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenTarget {
    /// The 150-graph skip-link benchmark.
    Csl {
        #[arg(long)]
        out: PathBuf,
    },
    /// `C_n` and the disjoint union of two `C_{n/2}`.
    Cycles {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// `G_n` (three paths of length n) and `G'_n` (lengths n-1, n, n+1).
    Threepaths {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EncodingsArg {
    None,
    Identity,
    Adjacency,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Uniform,
    Nb,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PoolingArg {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReadoutArg {
    Mlp,
    Linear,
}

/// Named hyperparameters; each sets one configuration key.
#[derive(Debug, Default, Args)]
pub struct Hyper {
    /// Window size (`model.window`).
    #[arg(long)]
    pub s: Option<usize>,
    /// Number of layers (`model.layers`).
    #[arg(long = "layers", visible_alias = "L")]
    pub layers: Option<usize>,
    /// Hidden width (`model.hidden`).
    #[arg(long)]
    pub d: Option<usize>,
    /// Convolution width (`model.conv_width`).
    #[arg(long)]
    pub conv_width: Option<usize>,
    #[arg(long, value_enum)]
    pub pooling: Option<PoolingArg>,
    #[arg(long, value_enum)]
    pub readout: Option<ReadoutArg>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Virtual node (`model.virtual_node`).
    #[arg(long)]
    pub vn: Option<bool>,
    #[arg(long)]
    pub p_star: Option<f64>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long, value_enum)]
    pub encodings: Option<EncodingsArg>,
    #[arg(long)]
    pub ell_train: Option<usize>,
    #[arg(long)]
    pub ell_eval: Option<usize>,
    /// Walk seeds per test evaluation (`eval_seeds`).
    #[arg(long)]
    pub r_test: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Training configuration JSON, or a manifest of an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dotted overrides such as `model.window=4`; values parse as JSON,
    /// falling back to a string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(flatten)]
    pub hyper: Hyper,
    /// Dataset file; the skip-link benchmark when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of fold rotations; all folds when omitted.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset file; the skip-link benchmark when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of walk seeds.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Restrict to the graphs of one fold.
    #[arg(long)]
    pub fold: Option<usize>,
    /// Directory for the report and manifest; stdout only when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistinguishArgs {
    /// `cyclesN`, `threepathsN`, or a JSON file holding two graphs.
    pub pair: String,
    #[arg(long)]
    pub s: usize,
    #[arg(long, value_enum, default_value = "nb")]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 8)]
    pub ell: usize,
    /// Estimate from this many sampled walks instead of exactly.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed of the sampled walks.
    #[arg(long, default_value_t = 0)]
    pub sample_seed: u64,
    /// Largest number of live states of the exact computation.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// Directory for the report and manifest; stdout only when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Relative error tolerance.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Number of random seeds to audit.
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
}
