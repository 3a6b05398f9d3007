//! Command-line surface. Every option can also come from the JSON config
//! file, under a section named after the subcommand; flags win.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Failure, Result};
use crate::{report, stages};

#[derive(Debug, Parser)]
#[command(name = "opkb", version, about = "Build opinion knowledge bases from reviews and use them to augment comprehension models")]
pub struct Cli {
    /// JSON config with one section per subcommand, e.g. {"build-kb": {"min_support": 2}}.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Replace existing output files.
    #[arg(long, global = true)]
    pub overwrite: bool,
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reviews JSONL -> opinion tuples JSONL.
    Extract(ExtractArgs),
    /// Tuples JSONL -> KB TSV, opinions list and stats JSON.
    BuildKb(BuildKbArgs),
    /// KB -> seq2seq reasoner checkpoint.
    TrainReasoner(TrainReasonerArgs),
    /// Phrases -> vectors from a reasoner or DistMult checkpoint.
    Embed(EmbedArgs),
    /// Triples TSV -> DistMult checkpoint.
    TrainDistmult(TrainDistmultArgs),
    /// Train an AE, ASC or QA model and predict on its validation split.
    TrainTask(TrainTaskArgs),
    /// Predictions -> score report (mean and std over runs).
    Evaluate(EvaluateArgs),
    /// KB + edge list -> overlap percentages.
    Overlap(OverlapArgs),
    /// Run the synthetic fixtures and write KB-statistics and QA tables.
    ReproReport(ReproArgs),
}

impl Command {
    pub fn section(&self) -> &'static str {
        match self {
            Command::Extract(_) => "extract",
            Command::BuildKb(_) => "build-kb",
            Command::TrainReasoner(_) => "train-reasoner",
            Command::Embed(_) => "embed",
            Command::TrainDistmult(_) => "train-distmult",
            Command::TrainTask(_) => "train-task",
            Command::Evaluate(_) => "evaluate",
            Command::Overlap(_) => "overlap",
            Command::ReproReport(_) => "repro-report",
        }
    }
}

pub const SECTIONS: [&str; 9] = [
    "extract",
    "build-kb",
    "train-reasoner",
    "embed",
    "train-distmult",
    "train-task",
    "evaluate",
    "overlap",
    "repro-report",
];

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reviews: Option<PathBuf>,
    /// Lexicon JSON for the rule extractor and tagger features.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    /// Labeled tagging JSONL; when given, a trained tagger replaces the rules.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tagging_data: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tagger_epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildKbArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuples: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_entities: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_extractions: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub npmi_threshold: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_support: Option<usize>,
    /// Reference edge list used for the overlap columns of the stats.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_list: Option<PathBuf>,
    /// KB TSV; the opinions list goes next to it with extension `.opinions`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Defaults to the KB path with extension `.stats.json`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainReasonerArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kb: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub word_vectors: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Checkpoint manifest path; the payload goes next to it with extension `.bin`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedArgs {
    /// Reasoner or DistMult checkpoint.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// One phrase per line.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phrases: Option<PathBuf>,
    /// Embed every opinion of this KB instead of a phrase file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kb: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainDistmultArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triples: Option<PathBuf>,
    /// Held-out triples; when given, filtered rank metrics are written to `<out>.rank.json`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_triples: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negatives: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainTaskArgs {
    /// ae, asc or qa.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// QA dataset JSON (with --qa-reviews).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa_reviews: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absa_train: Option<PathBuf>,
    /// Without it the training file is split.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absa_validation: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    /// Lexicon for the extractor that picks each sentence's opinion.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    /// zero, reasoner or distmult.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_model: Option<PathBuf>,
    /// Width of the zero source.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_width: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_answer_tokens: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Defaults to the checkpoint path with extension `.predictions.jsonl`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictions_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// One predictions file per run.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictions: Option<Vec<PathBuf>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa_reviews: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absa: Option<PathBuf>,
    /// Seeds of the runs; read from the prediction manifests when omitted.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kb: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_list: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproArgs {
    /// Directory receiving kb_statistics.json and qa_augmentation.json.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Seed of the synthetic review corpora.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus_seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entities_per_domain: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reviews_per_entity: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reasoner_epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa_epochs: Option<usize>,
}

/// Config-file values overlaid with explicitly given flags.
pub fn merge<T: Serialize + DeserializeOwned>(section: &str, flags: &T, config: Option<&Value>) -> Result<T> {
    let mut merged = Map::new();
    if let Some(Value::Object(sec)) = config.and_then(|c| c.get(section)) {
        merged.extend(sec.clone());
    }
    if let Value::Object(f) = serde_json::to_value(flags).map_err(|e| Failure::config(e.to_string()))? {
        merged.extend(f);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Failure::config(format!("section `{section}`: {e}")))
}

pub fn load_config(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let obj = v
        .as_object()
        .ok_or_else(|| Failure::config(format!("{}: config must be a JSON object", path.display())))?;
    for (key, sec) in obj {
        if !SECTIONS.contains(&key.as_str()) {
            return Err(Failure::config(format!(
                "{}: unknown config section `{key}` (expected one of {})",
                path.display(),
                SECTIONS.join(", ")
            )));
        }
        if !sec.is_object() {
            return Err(Failure::config(format!("{}: section `{key}` must be an object", path.display())));
        }
    }
    Ok(v)
}

/// A required option, from either a flag or the config.
pub fn required<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Failure::config(format!("missing --{} (or `{name}` in the config)", name.replace('_', "-"))))
}

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref().map(load_config).transpose()?;
    let cfg = config.as_ref();
    let section = cli.command.section();
    let ow = cli.overwrite;
    match &cli.command {
        Command::Extract(a) => stages::extract(&merge(section, a, cfg)?, ow),
        Command::BuildKb(a) => stages::build_kb(&merge(section, a, cfg)?, ow),
        Command::TrainReasoner(a) => stages::train_reasoner(&merge(section, a, cfg)?, ow),
        Command::Embed(a) => stages::embed(&merge(section, a, cfg)?, ow),
        Command::TrainDistmult(a) => stages::train_distmult(&merge(section, a, cfg)?, ow),
        Command::TrainTask(a) => stages::train_task(&merge(section, a, cfg)?, ow),
        Command::Evaluate(a) => stages::evaluate(&merge(section, a, cfg)?, ow),
        Command::Overlap(a) => stages::overlap(&merge(section, a, cfg)?, ow),
        Command::ReproReport(a) => report::run(&merge(section, a, cfg)?, ow),
    }
}
