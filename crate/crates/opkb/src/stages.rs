//! One function per pipeline stage. Each validates every path first, then
//! computes, then writes its outputs and their manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use opkb_core::comprehension::{
    self, predict, prepare, CommonsenseSource, Dataset, EncoderConfig, Prediction, Task, TrainConfig,
};
use opkb_core::distmult::{rank_eval, train_distmult_logged, DistMultConfig, DistMultModel};
use opkb_core::extract::{train_tagger, Extractor, Lexicon};
use opkb_core::kb::{build_matrix, extraction_overlap, mine_facts, relation_overlap, select, stats, KnowledgeBase};
use opkb_core::metrics::aggregate;
use opkb_core::reasoner::{embed_premise, train_reasoner as fit_reasoner, ReasonerConfig, Seq2SeqModel};
use opkb_core::text::{split, AbsaExample, EdgeList, QaExample, Review};
use serde::Serialize;
use serde_json::{json, Value};

use crate::checkpoint::{self, payload_path, TaskMeta};
use crate::cli::{required, BuildKbArgs, EmbedArgs, EvaluateArgs, ExtractArgs, OverlapArgs, TrainDistmultArgs, TrainReasonerArgs, TrainTaskArgs};
use crate::error::{Failure, Result};
use crate::formats::{self, PhraseVector, ReviewTuples, ScoreReport};
use crate::manifest::{guard_outputs, manifest_path, Stage, StageManifest};

pub const DEFAULT_DOMAIN: &str = "default";

fn params<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).unwrap_or(Value::Null)
}

fn ensure_finite(what: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("{what} is not finite")))
    }
}

// ---------------------------------------------------------------- extract

pub fn extract(a: &ExtractArgs, overwrite: bool) -> Result<()> {
    let reviews_path = required(&a.reviews, "reviews")?;
    let lexicon_path = required(&a.lexicon, "lexicon")?;
    let out = required(&a.out, "out")?;
    let seed = a.seed.unwrap_or(0);
    let mut stage = Stage::new("extract", Some(seed), params(a));
    stage.raw(&reviews_path)?;
    stage.raw(&lexicon_path)?;
    if let Some(t) = &a.tagging_data {
        stage.raw(t)?;
    }
    guard_outputs(&[out.clone()], overwrite)?;

    let reviews = formats::load_reviews(&reviews_path)?;
    let lexicon = formats::load_lexicon(&lexicon_path)?;
    let extractor = match &a.tagging_data {
        Some(path) => {
            let labeled = formats::load_tagging(path)?;
            let epochs = a.tagger_epochs.unwrap_or(5);
            info!("training tagger on {} sentences for {epochs} epochs", labeled.len());
            Extractor::Tagger(train_tagger(&labeled, epochs, seed, Some(&lexicon))?)
        }
        None => Extractor::Rules(lexicon),
    };
    let lines: Vec<ReviewTuples> = reviews
        .iter()
        .map(|r| ReviewTuples {
            review_id: r.id.clone(),
            entity: r.entity_id.clone(),
            tuples: extractor.extract_review(r).concat(),
        })
        .collect();
    info!(
        "extracted {} tuples from {} reviews",
        lines.iter().map(|l| l.tuples.len()).sum::<usize>(),
        lines.len()
    );
    formats::write_jsonl(&out, &lines)?;
    stage.finish(&[vec![out]])
}

// ---------------------------------------------------------------- build-kb

pub fn build_kb(a: &BuildKbArgs, overwrite: bool) -> Result<()> {
    let tuples_path = required(&a.tuples, "tuples")?;
    let out = required(&a.out, "out")?;
    let stats_out = a.stats_out.clone().unwrap_or_else(|| out.with_extension("stats.json"));
    let domain = a.domain.clone().unwrap_or_else(|| DEFAULT_DOMAIN.into());
    let mut stage = Stage::new("build-kb", None, params(a));
    stage.upstream(&tuples_path, "extract")?;
    if let Some(e) = &a.edge_list {
        stage.raw(e)?;
    }
    let sidecar = formats::kb_sidecar(&out);
    guard_outputs(&[out.clone(), sidecar.clone(), stats_out.clone()], overwrite)?;

    let lines = formats::load_tuples(&tuples_path)?;
    let reviews = lines
        .iter()
        .map(|l| Review::new(l.review_id.as_str(), l.entity.as_str(), ""))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Failure::in_data(tuples_path.display(), e))?;
    let tuples: Vec<_> = lines.into_iter().map(|l| l.tuples).collect();
    let (matrix, tensor) = build_matrix(&reviews, &tuples)?;
    if tensor.marginalize() != matrix {
        return Err(Failure::Numerical("modifier-aspect tensor disagrees with the extraction matrix".into()));
    }
    let sel = select(&matrix, a.top_entities.unwrap_or(2000), a.top_extractions.unwrap_or(5000))?;
    let facts = mine_facts(&sel.matrix, a.npmi_threshold.unwrap_or(0.3), a.min_support.unwrap_or(3))?;
    if facts.is_empty() {
        return Err(Failure::data(
            "empty knowledge base: no opinion pair passed the thresholds (try a lower --npmi-threshold or --min-support)",
        ));
    }
    let kb = KnowledgeBase::from_facts(domain, facts)?;
    let edges = match &a.edge_list {
        Some(p) => formats::load_edge_list(p)?,
        None => EdgeList::new(),
    };
    let st = stats(&kb, &sel.matrix, &edges)?;
    info!("{} opinions, {} facts from {} entities", st.n_unique_opinions, st.n_facts, st.n_entities);
    formats::save_kb(&kb, &out)?;
    formats::write_json(&stats_out, &st)?;
    stage.finish(&[vec![out, sidecar], vec![stats_out]])
}

// ---------------------------------------------------------------- overlap

pub fn overlap(a: &OverlapArgs, overwrite: bool) -> Result<()> {
    let kb_path = required(&a.kb, "kb")?;
    let edge_path = required(&a.edge_list, "edge_list")?;
    let out = required(&a.out, "out")?;
    let mut stage = Stage::new("overlap", None, params(a));
    stage.upstream(&kb_path, "build-kb")?;
    stage.raw(&edge_path)?;
    guard_outputs(&[out.clone()], overwrite)?;

    let kb = formats::load_kb(&kb_path, a.domain.as_deref().unwrap_or(DEFAULT_DOMAIN))?;
    let edges = formats::load_edge_list(&edge_path)?;
    let report = json!({
        "n_opinions": kb.opinions.len(),
        "n_facts": kb.facts.len(),
        "extraction_overlap": extraction_overlap(&kb, &edges)?,
        "relation_overlap": relation_overlap(&kb, &edges)?,
    });
    formats::write_json(&out, &report)?;
    stage.finish(&[vec![out]])
}

// ---------------------------------------------------------------- reasoner

pub fn train_reasoner(a: &TrainReasonerArgs, overwrite: bool) -> Result<()> {
    let kb_path = required(&a.kb, "kb")?;
    let out = required(&a.out, "out")?;
    let defaults = ReasonerConfig::default();
    let cfg = ReasonerConfig {
        embedding_dim: a.embedding_dim.unwrap_or(defaults.embedding_dim),
        hidden_dim: a.hidden_dim.unwrap_or(defaults.hidden_dim),
        epochs: a.epochs.unwrap_or(defaults.epochs),
        learning_rate: a.learning_rate.unwrap_or(defaults.learning_rate),
        seed: a.seed.unwrap_or(defaults.seed),
    };
    let mut stage = Stage::new("train-reasoner", Some(cfg.seed), params(a));
    stage.upstream(&kb_path, "build-kb")?;
    if let Some(w) = &a.word_vectors {
        stage.raw(w)?;
    }
    guard_outputs(&[out.clone(), payload_path(&out)], overwrite)?;

    let kb = formats::load_kb(&kb_path, a.domain.as_deref().unwrap_or(DEFAULT_DOMAIN))?;
    let wv = a.word_vectors.as_deref().map(formats::load_word_vectors).transpose()?;
    if let Some(w) = &wv {
        if w.dim() != cfg.embedding_dim {
            return Err(Failure::config(format!(
                "word vectors have dim {} but --embedding-dim is {}",
                w.dim(),
                cfg.embedding_dim
            )));
        }
    }
    info!("training reasoner on {} facts", kb.facts.len());
    let model = fit_reasoner(&kb, wv.as_ref(), &cfg)?;
    let loss = model.mean_token_loss(&kb)?;
    ensure_finite("reasoner loss", loss)?;
    info!("mean token loss {loss:.4}");
    let hyper = json!({
        "embedding_dim": cfg.embedding_dim,
        "hidden_dim": cfg.hidden_dim,
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
    });
    checkpoint::save_reasoner(&out, &model, cfg.seed, hyper)?;
    stage.finish(&[vec![out.clone(), payload_path(&out)]])
}

// ---------------------------------------------------------------- embed

enum Source {
    Reasoner(Seq2SeqModel),
    DistMult(DistMultModel),
}

impl Source {
    fn as_commonsense(&self) -> CommonsenseSource<'_> {
        match self {
            Source::Reasoner(m) => CommonsenseSource::Reasoner(m),
            Source::DistMult(m) => CommonsenseSource::DistMult(m),
        }
    }
}

fn load_source(path: &Path) -> Result<Source> {
    let ck = checkpoint::read(path)?;
    match ck.manifest.kind.as_str() {
        "reasoner" => Ok(Source::Reasoner(checkpoint::reasoner_from(&ck)?)),
        "distmult" => Ok(Source::DistMult(checkpoint::distmult_from(&ck)?)),
        other => Err(Failure::data(format!(
            "{}: a {other} checkpoint cannot embed phrases",
            path.display()
        ))),
    }
}

pub fn embed(a: &EmbedArgs, overwrite: bool) -> Result<()> {
    let model_path = required(&a.model, "model")?;
    let out = required(&a.out, "out")?;
    let mut stage = Stage::new("embed", None, params(a));
    stage.upstream(&model_path, "train-reasoner")?;
    match (&a.phrases, &a.kb) {
        (Some(p), None) => stage.raw(p)?,
        (None, Some(k)) => stage.upstream(k, "build-kb")?,
        _ => return Err(Failure::config("give exactly one of --phrases or --kb")),
    }
    guard_outputs(&[out.clone()], overwrite)?;

    let source = load_source(&model_path)?;
    let phrases: Vec<String> = match (&a.phrases, &a.kb) {
        (Some(p), _) => formats::read_text(p)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        (_, Some(k)) => formats::load_kb(k, DEFAULT_DOMAIN)?.opinions.iter().map(|o| o.key()).collect(),
        _ => unreachable!("checked above"),
    };
    let cs = source.as_commonsense();
    let rows: Vec<PhraseVector> = phrases
        .into_iter()
        .map(|phrase| {
            let vector = match &source {
                Source::Reasoner(m) => embed_premise(m, &phrase).vector,
                Source::DistMult(_) => cs.vector(&phrase),
            };
            PhraseVector { phrase, vector }
        })
        .collect();
    if rows.iter().any(|r| r.vector.iter().any(|x| !x.is_finite())) {
        return Err(Failure::Numerical("non-finite phrase vector".into()));
    }
    formats::write_jsonl(&out, &rows)?;
    stage.finish(&[vec![out]])
}

// ---------------------------------------------------------------- DistMult

pub fn train_distmult(a: &TrainDistmultArgs, overwrite: bool) -> Result<()> {
    let triples_path = required(&a.triples, "triples")?;
    let out = required(&a.out, "out")?;
    let defaults = DistMultConfig::default();
    let cfg = DistMultConfig {
        dim: a.dim.unwrap_or(defaults.dim),
        epochs: a.epochs.unwrap_or(defaults.epochs),
        negatives: a.negatives.unwrap_or(defaults.negatives),
        learning_rate: a.learning_rate.unwrap_or(defaults.learning_rate),
        seed: a.seed.unwrap_or(defaults.seed),
    };
    let mut stage = Stage::new("train-distmult", Some(cfg.seed), params(a));
    stage.raw(&triples_path)?;
    if let Some(t) = &a.test_triples {
        stage.raw(t)?;
    }
    let rank_out = out.with_extension("rank.json");
    let mut outputs = vec![out.clone(), payload_path(&out)];
    if a.test_triples.is_some() {
        outputs.push(rank_out.clone());
    }
    guard_outputs(&outputs, overwrite)?;

    let triples = formats::load_triples(&triples_path)?;
    let (model, losses) = train_distmult_logged(&triples, &cfg)?;
    if let Some(last) = losses.last() {
        ensure_finite("DistMult loss", *last)?;
        info!("final epoch loss {last:.4}");
    }
    let hyper = json!({
        "dim": cfg.dim,
        "epochs": cfg.epochs,
        "negatives": cfg.negatives,
        "learning_rate": cfg.learning_rate,
    });
    checkpoint::save_distmult(&out, &model, cfg.seed, hyper)?;
    let mut groups = vec![vec![out.clone(), payload_path(&out)]];
    if let Some(t) = &a.test_triples {
        let test = formats::load_triples(t)?;
        let all: Vec<_> = triples.iter().chain(&test).cloned().collect();
        let metrics = rank_eval(&model, &test, &all)?;
        info!("filtered MRR {:.4}", metrics.mrr);
        formats::write_json(&rank_out, &metrics)?;
        groups.push(vec![rank_out]);
    }
    stage.finish(&groups)
}

// ---------------------------------------------------------------- comprehension

enum Data {
    Qa(Vec<QaExample>),
    Absa(Vec<AbsaExample>),
}

impl Data {
    fn view(&self) -> Dataset<'_> {
        match self {
            Data::Qa(x) => Dataset::Qa(x),
            Data::Absa(x) => Dataset::Absa(x),
        }
    }

    fn texts(&self) -> Vec<&str> {
        match self {
            Data::Qa(x) => x.iter().map(|q| q.review.text.as_str()).collect(),
            Data::Absa(_) => Vec::new(),
        }
    }
}

fn parse_task(s: &Option<String>) -> Result<Task> {
    required(s, "task")?
        .parse()
        .map_err(|_| Failure::config(format!("unknown task `{}` (expected ae, asc or qa)", s.as_deref().unwrap_or(""))))
}

pub fn train_task(a: &TrainTaskArgs, overwrite: bool) -> Result<()> {
    let task = parse_task(&a.task)?;
    let out = required(&a.out, "out")?;
    let preds_out = a.predictions_out.clone().unwrap_or_else(|| out.with_extension("predictions.jsonl"));
    let full = TrainConfig::full(task);
    let cfg = TrainConfig {
        encoder: EncoderConfig {
            embedding_dim: a.embedding_dim.unwrap_or(16),
            hidden_dim: a.hidden_dim.unwrap_or(32),
        },
        epochs: a.epochs.unwrap_or(full.epochs),
        learning_rate: a.learning_rate.unwrap_or(full.learning_rate),
        seed: a.seed.unwrap_or(0),
        max_answer_tokens: a.max_answer_tokens.unwrap_or(full.max_answer_tokens),
        clip_norm: a.clip_norm.unwrap_or(full.clip_norm),
    };
    let fraction = a.train_fraction.unwrap_or(0.9);
    let split_seed = a.split_seed.unwrap_or(0);
    let source_kind = a.source.clone().unwrap_or_else(|| "zero".into());

    let mut stage = Stage::new("train-task", Some(cfg.seed), params(a));
    match task {
        Task::Qa => {
            stage.raw(&required(&a.qa, "qa")?)?;
            stage.raw(&required(&a.qa_reviews, "qa_reviews")?)?;
        }
        Task::Ae | Task::Asc => {
            stage.raw(&required(&a.absa_train, "absa_train")?)?;
            if let Some(v) = &a.absa_validation {
                stage.raw(v)?;
            }
        }
    }
    if let Some(l) = &a.lexicon {
        stage.raw(l)?;
    }
    match source_kind.as_str() {
        "zero" => {}
        "reasoner" => stage.upstream(&required(&a.source_model, "source_model")?, "train-reasoner")?,
        "distmult" => stage.upstream(&required(&a.source_model, "source_model")?, "train-distmult")?,
        other => return Err(Failure::config(format!("unknown source `{other}` (expected zero, reasoner or distmult)"))),
    }
    guard_outputs(&[out.clone(), payload_path(&out), preds_out.clone()], overwrite)?;

    let (train, validation) = match task {
        Task::Qa => {
            let all = formats::load_qa(a.qa.as_deref().expect("checked"), a.qa_reviews.as_deref().expect("checked"))?;
            let (t, v) = split(&all, fraction, split_seed)?;
            (Data::Qa(t), Data::Qa(v))
        }
        Task::Ae | Task::Asc => {
            let all = formats::load_absa(a.absa_train.as_deref().expect("checked"))?;
            match &a.absa_validation {
                Some(v) => (Data::Absa(all), Data::Absa(formats::load_absa(v)?)),
                None => {
                    let (t, v) = split(&all, fraction, split_seed)?;
                    (Data::Absa(t), Data::Absa(v))
                }
            }
        }
    };
    let lexicon = a.lexicon.as_deref().map(formats::load_lexicon).transpose()?.unwrap_or_else(Lexicon::default);
    let extractor = Extractor::Rules(lexicon);
    let loaded = match source_kind.as_str() {
        "zero" => None,
        _ => Some(load_source(a.source_model.as_deref().expect("checked"))?),
    };
    let source = match &loaded {
        Some(s) => {
            let cs = s.as_commonsense();
            if cs.name() != source_kind {
                return Err(Failure::config(format!("--source {source_kind} but the checkpoint holds a {} model", cs.name())));
            }
            cs
        }
        None => CommonsenseSource::Zero(a.source_width.unwrap_or(16)),
    };

    info!("training {} on {} examples with the {} source", task.as_str(), train.view().len(), source.name());
    let trained = comprehension::train_task(task, train.view(), validation.view(), &extractor, &source, &cfg)?;
    info!("kept epoch {} (validation history {:?})", trained.best_epoch, trained.history);
    let prepared = prepare(task, validation.view(), &extractor, &source)?;
    let preds = predict(&trained.model, &prepared, &validation.texts(), cfg.max_answer_tokens)?;

    let meta = TaskMeta {
        task,
        vocab: trained.model.encoder.vocab.clone(),
        embedding_dim: cfg.encoder.embedding_dim,
        hidden_dim: cfg.encoder.hidden_dim,
        source: source.name().into(),
        source_width: source.width(),
        max_answer_tokens: cfg.max_answer_tokens,
    };
    let hyper = json!({
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "clip_norm": cfg.clip_norm,
        "best_epoch": trained.best_epoch,
        "validation_history": trained.history,
    });
    checkpoint::save_task(&out, &trained.model, &meta, cfg.seed, hyper)?;
    formats::write_jsonl(&preds_out, &preds)?;
    stage.finish(&[vec![out.clone(), payload_path(&out)], vec![preds_out]])
}

// ---------------------------------------------------------------- evaluate

/// Gold examples in the order of `preds`, looked up by id.
fn gold_for<'a, T>(preds: &[Prediction], all: &'a [T], id: impl Fn(&T) -> &str) -> Result<Vec<T>>
where
    T: Clone + 'a,
{
    let index: BTreeMap<&str, &T> = all.iter().map(|x| (id(x), x)).collect();
    preds
        .iter()
        .map(|p| {
            index
                .get(p.id())
                .map(|x| (*x).clone())
                .ok_or_else(|| Failure::data(format!("prediction id `{}` is not in the dataset", p.id())))
        })
        .collect()
}

fn run_seed(pred_path: &Path) -> Result<u64> {
    let m = manifest_path(pred_path);
    if !m.is_file() {
        return Err(Failure::config(format!(
            "{} has no manifest to read its seed from; pass --seeds",
            pred_path.display()
        )));
    }
    let manifest: StageManifest = formats::read_json(&m)?;
    manifest
        .seed
        .ok_or_else(|| Failure::config(format!("{} records no seed; pass --seeds", m.display())))
}

pub fn evaluate(a: &EvaluateArgs, overwrite: bool) -> Result<()> {
    let task = parse_task(&a.task)?;
    let pred_paths: Vec<PathBuf> = required(&a.predictions, "predictions")?;
    if pred_paths.is_empty() {
        return Err(Failure::config("--predictions needs at least one file"));
    }
    let out = required(&a.out, "out")?;
    let mut stage = Stage::new("evaluate", None, params(a));
    for p in &pred_paths {
        stage.upstream(p, "train-task")?;
    }
    match task {
        Task::Qa => {
            stage.raw(&required(&a.qa, "qa")?)?;
            stage.raw(&required(&a.qa_reviews, "qa_reviews")?)?;
        }
        Task::Ae | Task::Asc => stage.raw(&required(&a.absa, "absa")?)?,
    }
    guard_outputs(&[out.clone()], overwrite)?;
    let seeds = match &a.seeds {
        Some(s) if s.len() == pred_paths.len() => s.clone(),
        Some(s) => {
            return Err(Failure::config(format!(
                "{} seeds given for {} prediction files",
                s.len(),
                pred_paths.len()
            )))
        }
        None => pred_paths.iter().map(|p| run_seed(p)).collect::<Result<_>>()?,
    };

    let data = match task {
        Task::Qa => Data::Qa(formats::load_qa(a.qa.as_deref().expect("checked"), a.qa_reviews.as_deref().expect("checked"))?),
        Task::Ae | Task::Asc => Data::Absa(formats::load_absa(a.absa.as_deref().expect("checked"))?),
    };
    let mut runs = Vec::new();
    for p in &pred_paths {
        let preds = formats::load_predictions(p)?;
        let score = match &data {
            Data::Qa(all) => {
                let gold = gold_for(&preds, all, |x: &QaExample| x.id.as_str())?;
                comprehension::evaluate(task, &preds, Dataset::Qa(&gold))
            }
            Data::Absa(all) => {
                let gold = gold_for(&preds, all, |x: &AbsaExample| x.id.as_str())?;
                comprehension::evaluate(task, &preds, Dataset::Absa(&gold))
            }
        }
        .map_err(|e| Failure::in_data(p.display(), e))?;
        runs.push(score.metrics);
    }
    let report = ScoreReport {
        task,
        metrics: aggregate(&runs)?,
        n_runs: runs.len(),
        seed_list: seeds,
    };
    formats::write_json(&out, &report)?;
    stage.finish(&[vec![out]])
}
