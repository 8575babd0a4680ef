//! Command-line front end: corpus preparation, adaptation, training,
//! evaluation, prediction and report rendering.
//!
//! Every file-producing command writes a [`RunManifest`] next to its main
//! output. Settings are layered flags > environment > config file.

mod commands;
mod config;
pub mod manifest;
mod render;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use manifest::{FileDigest, RunManifest};
pub use render::{curves_csv, render_table};

pub const ENV_SEED: &str = "PR_SEED";
pub const ENV_DATA_DIR: &str = "PR_DATA_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "oppmodel",
    version,
    about = "Opponent priority ranking from partial negotiation dialogues"
)]
pub struct Cli {
    /// Master seed; falls back to PR_SEED, then the config file, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Leave wall-clock timestamps out of manifests so repeated runs are
    /// byte-identical.
    #[arg(long, global = true)]
    pub deterministic: bool,

    /// Base directory for relative input paths; falls back to PR_DATA_DIR.
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,

    /// Manifest location; defaults to a file next to the main output.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest, generate or split corpora.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Build training data from argument metadata or DND-style dialogues.
    #[command(subcommand)]
    Adapt(AdaptCommand),
    /// Train a model and keep the epoch with the best tuning EMA@5.
    Train(TrainArgs),
    /// Score a model on labelled instances.
    Evaluate(EvaluateArgs),
    /// Emit per-k rankings as JSON lines.
    Predict(PredictArgs),
    /// Render metric reports as a plain-text table.
    Report(ReportArgs),
    /// Cross-validate over dialogue-level folds.
    Crossval(CrossvalArgs),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Convert raw data to canonical instance JSON lines.
    Ingest(IngestArgs),
    /// Write a synthetic corpus.
    Generate(GenerateArgs),
    /// Write a dialogue-level fold plan.
    Folds(FoldsArgs),
}

#[derive(Debug, Subcommand)]
pub enum AdaptCommand {
    /// Template dialogues from argument metadata.
    Ca(AdaptCaArgs),
    /// Issue-remapped DND-style dialogues.
    Dnd(AdaptDndArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RawFormat {
    Casino,
    Dnd,
    Canonical,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum MappingArg {
    /// book→food, hat→water, ball→firewood
    #[default]
    Default,
    /// A bijection drawn from the seed.
    Random,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum GenerateKind {
    /// Labelled negotiation dialogues.
    #[default]
    Dialogues,
    /// Argument metadata, the input of `adapt ca`.
    Arguments,
    /// DND-style raw dialogues, the input of `adapt dnd`.
    Dnd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Ranker,
    Bow,
    Random,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Documented defaults (20 epochs, lr 2e-5 for the ranker).
    #[default]
    Standard,
    /// Shorter schedule with a larger step size for from-scratch training.
    Desk,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, value_enum)]
    pub format: RawFormat,
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// JSON field map for CaSiNo-style records.
    #[arg(long, value_name = "PATH")]
    pub field_map: Option<PathBuf>,
    /// Issue mapping for DND-style input.
    #[arg(long, value_enum, default_value_t)]
    pub mapping: MappingArg,
    /// Keep DND dialogues that fail the length/distinct-value filter.
    #[arg(long)]
    pub no_filter: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t)]
    pub kind: GenerateKind,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub count: usize,
    /// Utterances (or turns) per dialogue.
    #[arg(long, default_value_t = 10)]
    pub utterances: usize,
    /// Probability that a templated statement becomes small talk.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Probability that a self turn states its own preference.
    #[arg(long, default_value_t = 0.4)]
    pub self_rate: f64,
}

#[derive(Debug, Args)]
pub struct FoldsArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 50)]
    pub tune_dialogues: usize,
}

#[derive(Debug, Args)]
pub struct AdaptCaArgs {
    /// CaSiNo-style JSON or argument sets as JSON lines.
    #[arg(long = "in", value_name = "META")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub field_map: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdaptDndArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub mapping: MappingArg,
    #[arg(long)]
    pub no_filter: bool,
}

/// Training settings shared by `train` and `crossval`.
#[derive(Debug, Args)]
pub struct TrainSettings {
    /// Model kind; overrides the config file.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// JSON or TOML training config.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub preset: Preset,
    /// Sources admitted to training, e.g. `cd,ca,dnd`.
    #[arg(long, value_name = "LIST")]
    pub mix: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub settings: TrainSettings,
    /// Training instances; repeat for several files.
    #[arg(long = "in", value_name = "PATH", required = true)]
    pub input: Vec<PathBuf>,
    /// Tuning instances. Without it, dialogues are held out of the input.
    #[arg(long, value_name = "PATH")]
    pub tune: Option<PathBuf>,
    /// Dialogues held out for tuning when `--tune` is absent.
    #[arg(long, default_value_t = 50)]
    pub tune_dialogues: usize,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

/// Either a checkpoint or `--model random`.
#[derive(Debug, Args)]
pub struct ModelSource {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Report path; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Per-k curves as CSV.
    #[arg(long, value_name = "PATH")]
    pub curves: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// A single k; all of 1..=5 when absent.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metric report JSON; repeat for one table row per report.
    #[arg(long = "in", value_name = "PATH", required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub curves: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub settings: TrainSettings,
    /// Primary instances, split into folds by dialogue.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Training-only instances (template or remapped data).
    #[arg(long, value_name = "PATH")]
    pub adjuncts: Vec<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 50)]
    pub tune_dialogues: usize,
    /// Comma-separated data fractions for a sweep, e.g. `0.25,0.5,1`.
    #[arg(long, value_name = "LIST")]
    pub fractions: Option<String>,
    /// Mixtures compared in the sweep; repeat, e.g. `--sweep-mix cd --sweep-mix cd,ca,dnd`.
    #[arg(long, value_name = "LIST")]
    pub sweep_mix: Vec<String>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

/// A failed run: message for stderr and the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<oppmodel::Error> for Failure {
    fn from(e: oppmodel::Error) -> Self {
        Self {
            code: if e.is_validation() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::runtime(e.to_string())
    }
}

/// Parses `argv` (program name first) and runs it with `env` as the
/// process environment. Returns the exit code: 0 success, 1 invalid
/// input or usage, 2 runtime or numeric failure.
pub fn dispatch(argv: &[String], env: &BTreeMap<String, String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match commands::run(cli, argv, env) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
