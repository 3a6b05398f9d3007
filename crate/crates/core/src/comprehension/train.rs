use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::encoder::{encoder_vocab, EncoderConfig, EncoderModel};
use super::heads::{ae_decode, asc_predict, best_span, ComprehensionModel, Logits, TaskHead};
use super::{appended_vectors, build_input, CommonsenseSource, InputParts, ModelInput, Task};
use crate::extract::Extractor;
use crate::metrics::{cls_scores, corpus_span_prf, token_f1};
use crate::nn::{Optimizer, Params};
use crate::text::{char_slice, AbsaExample, Polarity, QaExample, TokenSequence, TokenSpan};
use crate::{Error, Result};

pub const DEFAULT_MAX_ANSWER_TOKENS: usize = 50;

#[derive(Debug, Clone, Copy)]
pub enum Dataset<'a> {
    Absa(&'a [AbsaExample]),
    Qa(&'a [QaExample]),
}

impl Dataset<'_> {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Absa(x) => x.len(),
            Dataset::Qa(x) => x.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn words(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut add = |s: &TokenSequence| out.extend(s.tokens.iter().map(|t| t.lower()));
        match self {
            Dataset::Absa(xs) => xs.iter().for_each(|x| add(&x.sentence)),
            Dataset::Qa(xs) => xs.iter().for_each(|x| {
                add(&x.question);
                x.review.sentences.iter().for_each(&mut add);
            }),
        }
        out
    }
}

/// Training target, as token positions in the model input.
#[derive(Debug, Clone, PartialEq)]
pub enum Gold {
    /// Class per input token (index into B/I/O); `None` for synthetic tokens.
    Ae(Vec<Option<usize>>),
    Asc(usize),
    /// Start and end offsets within the review segment.
    Qa { start: usize, end: usize },
}

/// An example turned into model input with its commonsense vectors fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub id: String,
    pub input: ModelInput,
    pub appended: Vec<Vec<f64>>,
    pub gold: Option<Gold>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Qa {
        id: String,
        char_start: usize,
        char_end: usize,
        text: String,
    },
    Ae {
        id: String,
        spans: Vec<TokenSpan>,
    },
    Asc {
        id: String,
        polarity: Polarity,
    },
}

impl Prediction {
    pub fn id(&self) -> &str {
        match self {
            Prediction::Qa { id, .. } | Prediction::Ae { id, .. } | Prediction::Asc { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_answer_tokens: usize,
    pub clip_norm: f64,
}

impl TrainConfig {
    /// Full-run settings: 10 epochs at 3e-6 for QA, 20 epochs at 5e-5 for
    /// the sentence tasks.
    pub fn full(task: Task) -> Self {
        let (epochs, learning_rate) = match task {
            Task::Qa => (10, 3e-6),
            Task::Ae | Task::Asc => (20, 5e-5),
        };
        TrainConfig {
            encoder: EncoderConfig::default(),
            epochs,
            learning_rate,
            seed: 0,
            max_answer_tokens: DEFAULT_MAX_ANSWER_TOKENS,
            clip_norm: 5.0,
        }
    }
}

fn mismatch(task: Task, what: &str) -> Error {
    Error::invalid(alloc::format!("task {} does not accept {what}", task.as_str()))
}

/// Builds model inputs, gold targets and commonsense vectors for `data`.
pub fn prepare(task: Task, data: Dataset<'_>, extractor: &Extractor, source: &CommonsenseSource<'_>) -> Result<Vec<Prepared>> {
    match (task, data) {
        (Task::Qa, Dataset::Qa(xs)) => xs.iter().map(|x| prepare_qa(x, extractor, source)).collect(),
        (Task::Ae | Task::Asc, Dataset::Absa(xs)) => xs.iter().map(|x| prepare_absa(task, x, extractor, source)).collect(),
        (Task::Qa, Dataset::Absa(_)) => Err(mismatch(task, "an aspect dataset")),
        (_, Dataset::Qa(_)) => Err(mismatch(task, "a QA dataset")),
    }
}

fn prepare_absa(task: Task, x: &AbsaExample, extractor: &Extractor, source: &CommonsenseSource<'_>) -> Result<Prepared> {
    let review = core::slice::from_ref(&x.sentence);
    let extractions = [extractor.extract(&x.sentence, 0)];
    let (input, gold) = match task {
        Task::Ae => {
            let input = build_input(
                task,
                &InputParts {
                    review,
                    question: None,
                    aspect: None,
                },
            )?;
            let mut labels: Vec<Option<usize>> = input.sequence.tokens.iter().map(|t| (!t.synthetic).then_some(2)).collect();
            for span in &x.aspect_spans {
                let off = input.review_start;
                labels[off + span.start] = Some(0);
                for i in span.start + 1..=span.end {
                    labels[off + i] = Some(1);
                }
            }
            (input, Gold::Ae(labels))
        }
        _ => {
            let (Some(target), Some(polarity)) = (x.target_aspect, x.polarity) else {
                return Err(mismatch(task, alloc::format!("example {} without a target aspect", x.id).as_str()));
            };
            let aspect = x.sentence.slice(target);
            let input = build_input(
                task,
                &InputParts {
                    review,
                    question: None,
                    aspect: Some(&aspect),
                },
            )?;
            (input, Gold::Asc(polarity.index()))
        }
    };
    let appended = appended_vectors(&input.slots, &extractions, source);
    Ok(Prepared {
        id: x.id.clone(),
        input,
        appended,
        gold: Some(gold),
    })
}

fn prepare_qa(x: &QaExample, extractor: &Extractor, source: &CommonsenseSource<'_>) -> Result<Prepared> {
    let input = build_input(
        Task::Qa,
        &InputParts {
            review: &x.review.sentences,
            question: Some(&x.question),
            aspect: None,
        },
    )?;
    let review = &input.sequence.tokens[input.review_start..input.review_end];
    let start = review.iter().position(|t| t.char_end > x.answer_char_start);
    let end = review.iter().rposition(|t| t.char_start < x.answer_char_end);
    let gold = match (start, end) {
        (Some(s), Some(e)) if s <= e => Gold::Qa { start: s, end: e },
        _ => {
            return Err(Error::invalid(alloc::format!(
                "answer of {} does not cover any review token",
                x.id
            )))
        }
    };
    let extractions = extractor.extract_review(&x.review);
    let appended = appended_vectors(&input.slots, &extractions, source);
    Ok(Prepared {
        id: x.id.clone(),
        input,
        appended,
        gold: Some(gold),
    })
}

/// Predicted spans, polarities or answers, one per prepared example.
pub fn predict(model: &ComprehensionModel, data: &[Prepared], review_texts: &[&str], max_answer_tokens: usize) -> Result<Vec<Prediction>> {
    data.iter()
        .enumerate()
        .map(|(k, ex)| {
            let id = ex.id.clone();
            Ok(match model.logits(ex)? {
                Logits::Ae(rows) => Prediction::Ae {
                    id,
                    spans: ae_decode(&rows[ex.input.review_start..ex.input.review_end]),
                },
                Logits::Asc(row) => Prediction::Asc {
                    id,
                    polarity: asc_predict(&row),
                },
                Logits::Qa { start, end } => {
                    let (i, j) = best_span(&start, &end, max_answer_tokens)?;
                    let review = &ex.input.sequence.tokens[ex.input.review_start..ex.input.review_end];
                    let (char_start, char_end) = (review[i].char_start, review[j].char_end);
                    let text = review_texts.get(k).map_or_else(String::new, |t| char_slice(t, char_start, char_end));
                    Prediction::Qa {
                        id,
                        char_start,
                        char_end,
                        text,
                    }
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: Task,
    pub metrics: BTreeMap<String, f64>,
}

impl TaskScore {
    /// The metric used for model selection.
    pub fn primary(&self) -> f64 {
        let key = match self.task {
            Task::Ae => "f1",
            Task::Asc => "macro_f1",
            Task::Qa => "f1",
        };
        self.metrics[key]
    }
}

/// Scores predictions against the dataset they were made for (same order).
pub fn evaluate(task: Task, predictions: &[Prediction], data: Dataset<'_>) -> Result<TaskScore> {
    if predictions.len() != data.len() {
        return Err(Error::shape("predictions", data.len(), predictions.len()));
    }
    if data.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut metrics = BTreeMap::new();
    match (task, data) {
        (Task::Qa, Dataset::Qa(xs)) => {
            let (mut f1, mut em) = (0.0, 0.0);
            for (p, x) in predictions.iter().zip(xs) {
                let Prediction::Qa { text, .. } = p else {
                    return Err(mismatch(task, "non-QA predictions"));
                };
                let s = token_f1(text, &x.answer_text());
                f1 += s.f1;
                em += f64::from(s.exact);
            }
            let n = xs.len() as f64;
            metrics.insert("f1".into(), f1 / n);
            metrics.insert("exact".into(), em / n);
        }
        (Task::Ae, Dataset::Absa(xs)) => {
            let mut pairs = Vec::new();
            for (p, x) in predictions.iter().zip(xs) {
                let Prediction::Ae { spans, .. } = p else {
                    return Err(mismatch(task, "non-AE predictions"));
                };
                pairs.push((spans.as_slice(), x.aspect_spans.as_slice()));
            }
            let prf = corpus_span_prf(pairs);
            metrics.insert("precision".into(), prf.precision);
            metrics.insert("recall".into(), prf.recall);
            metrics.insert("f1".into(), prf.f1);
        }
        (Task::Asc, Dataset::Absa(xs)) => {
            let mut pred = Vec::new();
            let mut gold = Vec::new();
            for (p, x) in predictions.iter().zip(xs) {
                let Prediction::Asc { polarity, .. } = p else {
                    return Err(mismatch(task, "non-ASC predictions"));
                };
                pred.push(*polarity);
                gold.push(x.polarity.ok_or_else(|| mismatch(task, "examples without polarity"))?);
            }
            let s = cls_scores(&pred, &gold)?;
            metrics.insert("accuracy".into(), s.accuracy);
            metrics.insert("macro_f1".into(), s.macro_f1);
        }
        (Task::Qa, _) => return Err(mismatch(task, "an aspect dataset")),
        (_, _) => return Err(mismatch(task, "a QA dataset")),
    }
    Ok(TaskScore { task, metrics })
}

fn review_texts(data: Dataset<'_>) -> Vec<&str> {
    match data {
        Dataset::Qa(xs) => xs.iter().map(|x| x.review.text.as_str()).collect(),
        Dataset::Absa(_) => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub model: ComprehensionModel,
    /// Epoch (1-based) whose weights were kept; 0 means the initial weights.
    pub best_epoch: usize,
    /// Validation primary metric after each epoch.
    pub history: Vec<f64>,
}

/// Trains encoder and head with one Adam step per example. When a validation
/// set is given, the weights after the epoch with the best validation
/// metric are returned (earliest on ties); otherwise the final weights.
pub fn train_task(
    task: Task,
    train: Dataset<'_>,
    validation: Dataset<'_>,
    extractor: &Extractor,
    source: &CommonsenseSource<'_>,
    config: &TrainConfig,
) -> Result<Trained> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let train_prepared = prepare(task, train, extractor, source)?;
    let val_prepared = prepare(task, validation, extractor, source)?;
    let val_texts = review_texts(validation);

    let mut rng = crate::rng(config.seed);
    let encoder = EncoderModel::new(encoder_vocab(train.words()), config.encoder, &mut rng)?;
    let head = TaskHead::new(task, encoder.output_dim() + source.width(), &mut rng);
    let mut model = ComprehensionModel { encoder, head };

    let score = |m: &ComprehensionModel| -> Result<f64> {
        let preds = predict(m, &val_prepared, &val_texts, config.max_answer_tokens)?;
        Ok(evaluate(task, &preds, validation)?.primary())
    };
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_score = if val_prepared.is_empty() {
        f64::NEG_INFINITY
    } else {
        score(&model)?
    };

    let mut opt = Optimizer::adam(config.learning_rate)?.with_clip_norm(config.clip_norm);
    let mut grad = model.zeros_like();
    let mut order: Vec<usize> = (0..train_prepared.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            grad.zero();
            model.example_loss(&train_prepared[i], Some(&mut grad))?;
            opt.step(&mut model, &grad)?;
        }
        if val_prepared.is_empty() {
            best = model.clone();
            best_epoch = epoch;
            continue;
        }
        let s = score(&model)?;
        history.push(s);
        if s > best_score {
            best_score = s;
            best = model.clone();
            best_epoch = epoch;
        }
    }
    Ok(Trained {
        model: best,
        best_epoch,
        history,
    })
}
