//! Synthetic reproduction report: KB statistics for three generated review
//! domains, and QA scores on the disambiguation suite for each commonsense
//! source, averaged over seeds.

use std::collections::BTreeMap;
use std::path::PathBuf;

use log::info;
use opkb_core::comprehension::{evaluate, predict, prepare, train_task, CommonsenseSource, Dataset, EncoderConfig, Task, TrainConfig};
use opkb_core::distmult::{train_distmult, DistMultConfig, Triple};
use opkb_core::extract::Extractor;
use opkb_core::kb::{build_matrix, mine_facts, select, stats, KbStats, KnowledgeBase, KB_STATS_FIELDS};
use opkb_core::metrics::aggregate;
use opkb_core::reasoner::{train_reasoner, ReasonerConfig};
use opkb_core::synth::{domain_corpus, qa_suite, reference_edges, QaSuiteConfig, DOMAINS};
use serde::{Deserialize, Serialize};

use crate::cli::{required, ReproArgs};
use crate::error::{Failure, Result};
use crate::formats::{write_json, ScoreReport};
use crate::manifest::{guard_outputs, Stage};

pub const KB_TABLE: &str = "kb_statistics.json";
pub const QA_TABLE: &str = "qa_augmentation.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbTable {
    pub table: String,
    pub fields: Vec<String>,
    /// One column per domain.
    pub columns: Vec<KbStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRow {
    pub source: String,
    #[serde(flatten)]
    pub report: ScoreReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaTable {
    pub table: String,
    pub rows: Vec<QaRow>,
}

pub const SOURCES: [&str; 3] = ["zero", "distmult", "reasoner"];

/// Sizes used by the synthetic runs.
#[derive(Debug, Clone, PartialEq)]
pub struct DeskConfig {
    pub corpus_seed: u64,
    pub entities_per_domain: usize,
    pub reviews_per_entity: usize,
    pub npmi_threshold: f64,
    pub min_support: usize,
    pub reasoner: ReasonerConfig,
    pub distmult: DistMultConfig,
    pub qa: TrainConfig,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig {
            corpus_seed: 7,
            entities_per_domain: 40,
            reviews_per_entity: 8,
            npmi_threshold: 0.3,
            min_support: 3,
            reasoner: ReasonerConfig {
                embedding_dim: 16,
                hidden_dim: 16,
                epochs: 150,
                learning_rate: 0.01,
                seed: 0,
            },
            distmult: DistMultConfig {
                dim: 16,
                ..DistMultConfig::default()
            },
            qa: TrainConfig {
                encoder: EncoderConfig {
                    embedding_dim: 16,
                    hidden_dim: 32,
                },
                epochs: 15,
                learning_rate: 0.005,
                seed: 0,
                max_answer_tokens: 50,
                clip_norm: 5.0,
            },
        }
    }
}

pub fn kb_table(cfg: &DeskConfig) -> Result<KbTable> {
    let mut columns = Vec::new();
    for spec in &DOMAINS {
        let (reviews, lexicon) = domain_corpus(spec, cfg.entities_per_domain, cfg.reviews_per_entity, cfg.corpus_seed)?;
        let ex = Extractor::Rules(lexicon);
        let tuples: Vec<_> = reviews.iter().map(|r| ex.extract_review(r).concat()).collect();
        let (matrix, _) = build_matrix(&reviews, &tuples)?;
        let sel = select(&matrix, 2000, 5000)?;
        let facts = mine_facts(&sel.matrix, cfg.npmi_threshold, cfg.min_support)?;
        let kb = KnowledgeBase::from_facts(spec.name, facts)?;
        columns.push(stats(&kb, &sel.matrix, &reference_edges(spec))?);
    }
    Ok(KbTable {
        table: "kb_statistics".into(),
        fields: KB_STATS_FIELDS.iter().map(|s| s.to_string()).collect(),
        columns,
    })
}

/// Test-split QA metrics of every source for one seed. The seed drives the
/// suite sampling and every model.
pub fn qa_run(cfg: &DeskConfig, seed: u64) -> Result<BTreeMap<&'static str, BTreeMap<String, f64>>> {
    let suite = qa_suite(&QaSuiteConfig {
        seed: 11 + seed,
        ..QaSuiteConfig::default()
    })?;
    let reasoner = train_reasoner(&suite.kb, None, &ReasonerConfig { seed, ..cfg.reasoner })?;
    let triples: Vec<Triple> = suite
        .kb
        .facts
        .iter()
        .map(|f| Triple::new(f.premise.key(), "implies", f.conclusion.key()))
        .collect();
    let distmult = train_distmult(&triples, &DistMultConfig { seed, ..cfg.distmult })?;
    let extractor = Extractor::Rules(suite.lexicon.clone());
    let texts: Vec<&str> = suite.test.iter().map(|q| q.review.text.as_str()).collect();
    let mut out = BTreeMap::new();
    for name in SOURCES {
        let source = match name {
            "zero" => CommonsenseSource::Zero(cfg.reasoner.hidden_dim),
            "distmult" => CommonsenseSource::DistMult(&distmult),
            _ => CommonsenseSource::Reasoner(&reasoner),
        };
        let train_cfg = TrainConfig { seed, ..cfg.qa };
        let trained = train_task(Task::Qa, Dataset::Qa(&suite.train), Dataset::Qa(&suite.validation), &extractor, &source, &train_cfg)?;
        let prepared = prepare(Task::Qa, Dataset::Qa(&suite.test), &extractor, &source)?;
        let preds = predict(&trained.model, &prepared, &texts, train_cfg.max_answer_tokens)?;
        let score = evaluate(Task::Qa, &preds, Dataset::Qa(&suite.test))?;
        info!("seed {seed} {name}: exact {:.3} f1 {:.3}", score.metrics["exact"], score.metrics["f1"]);
        out.insert(name, score.metrics);
    }
    Ok(out)
}

pub fn qa_table(cfg: &DeskConfig, seeds: &[u64]) -> Result<QaTable> {
    if seeds.is_empty() {
        return Err(Failure::config("need at least one seed"));
    }
    let mut per_source: BTreeMap<&str, Vec<BTreeMap<String, f64>>> = BTreeMap::new();
    for &seed in seeds {
        for (name, metrics) in qa_run(cfg, seed)? {
            per_source.entry(name).or_default().push(metrics);
        }
    }
    let rows = SOURCES
        .iter()
        .map(|name| {
            let runs = &per_source[name];
            Ok(QaRow {
                source: name.to_string(),
                report: ScoreReport {
                    task: Task::Qa,
                    metrics: aggregate(runs)?,
                    n_runs: runs.len(),
                    seed_list: seeds.to_vec(),
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(QaTable {
        table: "qa_augmentation".into(),
        rows,
    })
}

pub fn run(a: &ReproArgs, overwrite: bool) -> Result<()> {
    let dir = required(&a.out_dir, "out_dir")?;
    let seeds = a.seeds.clone().unwrap_or_else(|| (0..5).collect());
    let mut cfg = DeskConfig::default();
    cfg.corpus_seed = a.corpus_seed.unwrap_or(cfg.corpus_seed);
    cfg.entities_per_domain = a.entities_per_domain.unwrap_or(cfg.entities_per_domain);
    cfg.reviews_per_entity = a.reviews_per_entity.unwrap_or(cfg.reviews_per_entity);
    cfg.reasoner.epochs = a.reasoner_epochs.unwrap_or(cfg.reasoner.epochs);
    cfg.qa.epochs = a.qa_epochs.unwrap_or(cfg.qa.epochs);
    let kb_path: PathBuf = dir.join(KB_TABLE);
    let qa_path: PathBuf = dir.join(QA_TABLE);
    guard_outputs(&[kb_path.clone(), qa_path.clone()], overwrite)?;
    let stage = Stage::new("repro-report", None, serde_json::to_value(a).unwrap_or_default());

    let kb = kb_table(&cfg)?;
    write_json(&kb_path, &kb)?;
    let qa = qa_table(&cfg, &seeds)?;
    write_json(&qa_path, &qa)?;
    stage.finish(&[vec![kb_path], vec![qa_path]])
}
