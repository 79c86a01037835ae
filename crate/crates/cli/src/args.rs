//! Command-line surface. Every flag can also be set through a
//! `TOPOSIEVE_`-prefixed environment variable; explicit flags win.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use toposieve::pipeline::ContextMode;

#[derive(Debug, Parser)]
#[command(name = "toposieve", version, about = "Toponym resolution against a GeoNames-style gazetteer")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse gazetteer files and write an index snapshot.
    BuildIndex(BuildIndexArgs),
    /// Resolve mentions to gazetteer entries.
    Resolve(ResolveArgs),
    /// Train the reranker, sweeping learning rates on the dev set.
    Train(TrainArgs),
    /// Score predictions against gold annotations.
    Evaluate(EvaluateArgs),
    /// Split a canonical corpus into train, dev and test files.
    Split(SplitArgs),
    /// Convert an LGL-style XML corpus to the canonical format.
    ConvertLgl(ConvertLglArgs),
    /// Serve resolution over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    /// Main gazetteer table (allCountries.txt layout).
    #[arg(long, env = "TOPOSIEVE_GEONAMES")]
    pub geonames: PathBuf,
    #[arg(long, env = "TOPOSIEVE_ALTERNATE_NAMES")]
    pub alternate_names: Option<PathBuf>,
    /// Two-column `form<TAB>country id` file.
    #[arg(long, env = "TOPOSIEVE_ADJECTIVAL")]
    pub adjectival: Option<PathBuf>,
    /// Feature-code inventory (featureCodes_en.txt layout).
    #[arg(long, env = "TOPOSIEVE_FEATURE_CODES")]
    pub feature_codes: Option<PathBuf>,
    /// Snapshot to write.
    #[arg(long, short, env = "TOPOSIEVE_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// Canonical line-delimited JSON documents.
    Canonical,
    /// One mention per line; a blank line starts a new document.
    Mentions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContextArg {
    None,
    #[value(name = "2stage")]
    TwoStage,
}

impl From<ContextArg> for ContextMode {
    fn from(c: ContextArg) -> Self {
        match c {
            ContextArg::None => ContextMode::None,
            ContextArg::TwoStage => ContextMode::TwoStage,
        }
    }
}

/// How candidates are scored.
#[derive(Debug, Clone, Args)]
pub struct ScorerArgs {
    /// Reranker model file. Without one, candidates keep generator order.
    #[arg(long, env = "TOPOSIEVE_MODEL")]
    pub model: Option<PathBuf>,
    /// External reranker program speaking the line-delimited JSON protocol.
    #[arg(long, env = "TOPOSIEVE_BRIDGE")]
    pub bridge: Option<PathBuf>,
    /// Argument passed to the bridge program; repeatable.
    #[arg(long = "bridge-arg", env = "TOPOSIEVE_BRIDGE_ARG", allow_hyphen_values = true)]
    pub bridge_args: Vec<String>,
    /// Per-request bridge timeout in milliseconds.
    #[arg(long, env = "TOPOSIEVE_BRIDGE_TIMEOUT_MS", default_value_t = 10_000)]
    pub bridge_timeout_ms: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ResolveOptions {
    /// Index snapshot written by build-index.
    #[arg(long, env = "TOPOSIEVE_INDEX")]
    pub index: PathBuf,
    /// Candidates generated per mention.
    #[arg(long, short, env = "TOPOSIEVE_K", default_value_t = toposieve::DEFAULT_K)]
    pub k: usize,
    #[arg(long, env = "TOPOSIEVE_CONTEXT", value_enum, default_value = "none")]
    pub context: ContextArg,
    #[command(flatten)]
    pub scorer: ScorerArgs,
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    #[command(flatten)]
    pub options: ResolveOptions,
    #[arg(long, short, env = "TOPOSIEVE_INPUT")]
    pub input: PathBuf,
    #[arg(long, env = "TOPOSIEVE_INPUT_FORMAT", value_enum, default_value = "canonical")]
    pub input_format: InputFormat,
    /// Predictions file; standard output when absent.
    #[arg(long, short, env = "TOPOSIEVE_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, env = "TOPOSIEVE_INDEX")]
    pub index: PathBuf,
    #[arg(long, env = "TOPOSIEVE_TRAIN")]
    pub train: PathBuf,
    #[arg(long, env = "TOPOSIEVE_DEV")]
    pub dev: PathBuf,
    /// Model file to write.
    #[arg(long, short, env = "TOPOSIEVE_OUT")]
    pub out: PathBuf,
    #[arg(long, short, env = "TOPOSIEVE_K", default_value_t = toposieve::DEFAULT_K)]
    pub k: usize,
    /// Context used for training instances and dev scoring.
    #[arg(long, env = "TOPOSIEVE_CONTEXT", value_enum, default_value = "none")]
    pub context: ContextArg,
    /// Learning rates to try; the best by dev accuracy is kept.
    #[arg(long = "lr", env = "TOPOSIEVE_LR", value_delimiter = ',', default_value = "0.01")]
    pub learning_rates: Vec<f64>,
    #[arg(long, env = "TOPOSIEVE_EPOCHS", default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, env = "TOPOSIEVE_BATCH_SIZE", default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, env = "TOPOSIEVE_MOMENTUM", default_value_t = 0.0)]
    pub momentum: f64,
    /// Seeds weight initialization and batch order.
    #[arg(long, env = "TOPOSIEVE_SEED", default_value_t = 13)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Output of `resolve`.
    #[arg(long, env = "TOPOSIEVE_PREDICTIONS")]
    pub predictions: PathBuf,
    /// Canonical gold corpus.
    #[arg(long, env = "TOPOSIEVE_GOLD")]
    pub gold: PathBuf,
    /// Snapshot used for feature-type groups, gold coordinates missing from
    /// the corpus, and generator recall.
    #[arg(long, env = "TOPOSIEVE_INDEX")]
    pub index: Option<PathBuf>,
    /// Cutoffs for generator recall (needs --index).
    #[arg(long = "recall-at", env = "TOPOSIEVE_RECALL_AT", value_delimiter = ',', default_value = "1,20")]
    pub recall_at: Vec<usize>,
    /// Label for the report row.
    #[arg(long, env = "TOPOSIEVE_NAME", default_value = "predictions")]
    pub name: String,
    /// Write the report as JSON here as well.
    #[arg(long, env = "TOPOSIEVE_REPORT")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, short, env = "TOPOSIEVE_INPUT")]
    pub input: PathBuf,
    /// Directory receiving train.jsonl, dev.jsonl and test.jsonl.
    #[arg(long, env = "TOPOSIEVE_OUT_DIR")]
    pub out_dir: PathBuf,
    #[arg(long, env = "TOPOSIEVE_RATIOS", value_delimiter = ',', default_values_t = [0.7, 0.1, 0.2])]
    pub ratios: Vec<f64>,
    #[arg(long, env = "TOPOSIEVE_SEED", default_value_t = toposieve::corpus::DEFAULT_SPLIT_SEED)]
    pub seed: u64,
    /// Train, dev and test doc-id lists; bypasses random splitting.
    #[arg(long, env = "TOPOSIEVE_SPLIT_FILES", value_delimiter = ',')]
    pub split_files: Option<Vec<PathBuf>>,
}

#[derive(Debug, Args)]
pub struct ConvertLglArgs {
    #[arg(long, short, env = "TOPOSIEVE_INPUT")]
    pub input: PathBuf,
    #[arg(long, short, env = "TOPOSIEVE_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub options: ResolveOptions,
    #[arg(long, env = "TOPOSIEVE_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}
