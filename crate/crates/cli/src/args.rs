use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  bad arguments (unknown flag, out-of-range value, unknown query id)
  3  file error (missing, unreadable, malformed or corrupt input)
  4  validation error (misaligned inputs, dimension mismatch, invalid store)
  5  numeric failure (non-finite loss, degenerate prototype)

Seeds:
  --seed seeds the k-means initialisation of partitioned indexes (default
  0x5eed0001) and is the base seed of few-shot runs (default 0); run i uses
  base + i.";

#[derive(Debug, Parser)]
#[command(name = "zsr", version, about = "Retrieval-augmented zero-shot classification over precomputed embeddings")]
#[command(after_help = EXIT_CODES)]
pub struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Base seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a flat or partitioned index over a corpus store.
    BuildIndex(BuildIndexArgs),
    /// Print the nearest corpus rows for one query.
    Retrieve(RetrieveArgs),
    /// Accuracy per template under one retrieval mode.
    Evaluate(EvalArgs),
    /// The same evaluation under none, single_query and multi_synonym.
    Ablate(EvalArgs),
    /// Accuracy spread across every template in the verbalizer.
    Sensitivity(EvalArgs),
    /// Prototype and linear-probe baselines over repeated support draws.
    Fewshot(FewShotArgs),
    /// Score a single input row and show the per-label breakdown.
    Classify(ClassifyArgs),
    /// Per-instance totals and predictions as CSV.
    ExportCsv(EvalArgs),
    /// Check a store against its invariants.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndexKind {
    Flat,
    Partitioned,
}

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    /// Corpus store (`.remb` path or base name).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output index file.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, value_enum, default_value_t = IndexKind::Flat)]
    pub kind: IndexKind,
    #[arg(long, default_value_t = 32)]
    pub partitions: usize,
    /// Partitions scanned per query.
    #[arg(long, default_value_t = 8)]
    pub probes: usize,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Index file; an exact scan is used when omitted.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Store holding the query embedding (defaults to the corpus).
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, conflicts_with = "query_text", required_unless_present = "query_text")]
    pub query_id: Option<String>,
    /// Text of a row in the query store.
    #[arg(long)]
    pub query_text: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RetrievalArgs {
    /// none, single_query or multi_synonym. Defaults to multi_synonym for
    /// closed-set verbalizers and single_query for multiple-choice ones.
    #[arg(long)]
    pub mode: Option<String>,
    /// Retrieved anchors per label (K).
    #[arg(long, default_value_t = 25)]
    pub top_k: usize,
    /// Queries per label in multi_synonym mode (N); must divide K.
    #[arg(long, default_value_t = 5)]
    pub num_synonyms: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub verbalizer: PathBuf,
    /// Embedded label prompts (closed-set verbalizers).
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Embedded test inputs, one row per dataset instance (premises for
    /// multiple-choice).
    #[arg(long)]
    pub test: PathBuf,
    /// Dataset JSONL with gold labels.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Embedded answer choices, concatenated in dataset order
    /// (multiple-choice only).
    #[arg(long)]
    pub choices: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    /// Report file (JSON, or CSV for export-csv).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Prototypical,
    LinearProbe,
    Both,
}

#[derive(Debug, Args)]
pub struct FewShotArgs {
    /// Labelled pool the support examples are drawn from.
    #[arg(long)]
    pub support: PathBuf,
    #[arg(long)]
    pub support_dataset: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Class count is taken from this verbalizer unless --num-classes is set.
    #[arg(long, required_unless_present = "num_classes")]
    pub verbalizer: Option<PathBuf>,
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// Support examples per class; comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8, 12, 16])]
    pub shots: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub num_seeds: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub verbalizer: PathBuf,
    #[arg(long)]
    pub prompts: PathBuf,
    /// Store holding the input row.
    #[arg(long)]
    pub test: PathBuf,
    /// Id of the row to classify.
    #[arg(long)]
    pub input_id: String,
    #[arg(long, default_value_t = 0)]
    pub template: usize,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub store: PathBuf,
}
