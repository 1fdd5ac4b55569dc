//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "uapg", version, about = "Universal adversarial perturbations and NR-metric stability")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic component.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Score cache directory for eval-stability.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Append timing lines to this file instead of standard error.
    #[arg(long, global = true)]
    pub timing_log: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a universal perturbation against a metric.
    TrainUap(TrainArgs),
    /// Scale a perturbation to an amplitude and apply it to an image or video.
    ApplyUap(ApplyArgs),
    /// Run the per-image gradient attack under an MSE budget.
    AttackImage(AttackArgs),
    /// Evaluate metric stability and write the report and CSV exports.
    EvalStability(EvalArgs),
    /// Re-emit the CSV exports of an existing report.
    ReportCsv(ReportArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `builtin:<name>` or `external:<command>`.
    #[arg(long)]
    pub metric: Option<String>,
    /// Directory of PNG images, or `synthetic:seed=S,count=N,size=T`.
    #[arg(long)]
    pub images: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub clip_bound: Option<f64>,
    #[arg(long)]
    pub tile: Option<usize>,
    /// Keep dataset order fixed across epochs.
    #[arg(long)]
    pub no_shuffle: bool,
    /// Perturbation file (default `<out>/uap.uapp`); the log goes next to it.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// UAPP file.
    #[arg(long)]
    pub perturbation: Option<PathBuf>,
    /// PNG, Y4M, or a synthetic image/video spec.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Modulate the perturbation by the local-contrast mask.
    #[arg(long)]
    pub csf: bool,
    #[arg(long)]
    pub mask_window: Option<usize>,
    /// Output file (`.png` or `.y4m`; default `<out>/attacked.<ext>`).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub metric: Option<String>,
    /// PNG or a synthetic image spec.
    #[arg(long)]
    pub input: Option<String>,
    /// MSE budget.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Output PNG (default `<out>/attacked.png`).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Apply perturbations through the local-contrast mask.
    #[arg(long)]
    pub csf: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON (default `<out>/report.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also recompute every derived value and require an exact match.
    #[arg(long)]
    pub verify: bool,
}
