//! Command-line front end: `analyze`, `build`, `train`, `sr`, `eval`, `prune`, `inspect`.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use awsrn::data::DataError;
use awsrn::metrics::{MetricsError, PruneError};
use awsrn::model::{CheckpointError, ModelError};
use awsrn::train::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{0}")]
    Scale(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl CliError {
    /// Short machine-parsable category printed as `error[category]`.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Data(_) => "data",
            CliError::Model(_) => "model",
            CliError::Checkpoint(_) => "checkpoint",
            CliError::Scale(_) => "scale",
            CliError::Train(_) => "train",
            CliError::Prune(_) => "prune",
            CliError::Metrics(_) => "metrics",
        }
    }

    /// The whole error on one line.
    pub fn line(&self) -> String {
        let msg = self.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{}]: {msg}", self.category())
    }
}

#[derive(Debug, Parser)]
#[command(name = "awsrn", version, about = "Adaptive weighted super-resolution networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parameter and Multi-Adds report with a per-layer breakdown.
    Analyze(AnalyzeArgs),
    /// Build a freshly initialised model and save it.
    Build(BuildArgs),
    /// Train on a directory of HR images.
    Train(TrainArgs),
    /// Super-resolve one PNG.
    Sr(SrArgs),
    /// PSNR/SSIM on the Y channel against a bicubic baseline.
    Eval(EvalArgs),
    /// Remove reconstruction branches with small weights.
    Prune(PruneArgs),
    /// Print the adaptive weights of a checkpoint.
    Inspect(InspectArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelArgs {
    /// Preset name: awsrn-s, awsrn-sd, awsrn-m or awsrn.
    #[arg(long = "model")]
    pub preset: Option<String>,
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scale: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output image size for Multi-Adds, `WxH`.
    #[arg(long, default_value = "1280x720")]
    pub out_size: String,
    /// Also write the breakdown as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Directory of HR PNGs (or a `manifest.txt` listing them).
    #[arg(long)]
    pub data: PathBuf,
    /// Final checkpoint; periodic checkpoints overwrite it.
    #[arg(long)]
    pub out: PathBuf,
    /// Start from this checkpoint instead of a fresh build.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Loss trace file (default: `<out>.trace`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub halve_every: Option<u64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Print the loss to stderr every this many iterations (0 disables).
    #[arg(long, default_value_t = 100)]
    pub log_every: u64,
}

#[derive(Debug, Args)]
pub struct SrArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Expected scale; must match the checkpoint.
    #[arg(long)]
    pub scale: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub hr_dir: PathBuf,
    /// Expected scale; must match the checkpoint.
    #[arg(long)]
    pub scale: Option<usize>,
    /// Border excluded from PSNR/SSIM (default: the scale).
    #[arg(long)]
    pub shave: Option<usize>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Runs one parsed command, returning its stdout text.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Build(a) => commands::build(&a),
        Command::Train(a) => commands::train(&a),
        Command::Sr(a) => commands::sr(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Prune(a) => commands::prune(&a),
        Command::Inspect(a) => commands::inspect(&a),
    }
}
