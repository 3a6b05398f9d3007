//! Scores for span QA, aspect extraction and sentiment classification.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::text::{tokenize, Polarity, TokenSpan};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaScore {
    pub f1: f64,
    pub exact: u8,
}

/// Lowercased tokens with punctuation-only tokens removed. Articles are kept.
pub fn normalize_answer(text: &str) -> Vec<String> {
    tokenize(&text.to_lowercase())
        .tokens
        .into_iter()
        .filter(|t| !t.is_punct())
        .map(|t| t.surface)
        .collect()
}

/// Token-overlap F1 on normalized answers, plus exact match.
pub fn token_f1(prediction: &str, gold: &str) -> QaScore {
    let pred = normalize_answer(prediction);
    let gold = normalize_answer(gold);
    let exact = u8::from(pred == gold);
    if pred.is_empty() || gold.is_empty() {
        let f1 = if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
        return QaScore { f1, exact };
    }
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for w in &gold {
        *counts.entry(w).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for w in &pred {
        if let Some(c) = counts.get_mut(w.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    let f1 = if overlap == 0 {
        0.0
    } else {
        let p = overlap as f64 / pred.len() as f64;
        let r = overlap as f64 / gold.len() as f64;
        2.0 * p * r / (p + r)
    };
    QaScore { f1, exact }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(correct: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

/// Exact-boundary span matching. Empty denominators give 0.
pub fn span_prf(pred_spans: &[TokenSpan], gold_spans: &[TokenSpan]) -> Prf {
    let (c, p, g) = span_counts(pred_spans, gold_spans);
    Prf::from_counts(c, p, g)
}

fn span_counts(pred_spans: &[TokenSpan], gold_spans: &[TokenSpan]) -> (usize, usize, usize) {
    let mut pred = pred_spans.to_vec();
    pred.sort_unstable();
    pred.dedup();
    let mut gold = gold_spans.to_vec();
    gold.sort_unstable();
    gold.dedup();
    let correct = pred.iter().filter(|s| gold.binary_search(s).is_ok()).count();
    (correct, pred.len(), gold.len())
}

/// Micro-averaged span P/R/F1 over a corpus of `(predicted, gold)` span lists.
pub fn corpus_span_prf<'a, I>(pairs: I) -> Prf
where
    I: IntoIterator<Item = (&'a [TokenSpan], &'a [TokenSpan])>,
{
    let (mut c, mut p, mut g) = (0, 0, 0);
    for (pred, gold) in pairs {
        let (ci, pi, gi) = span_counts(pred, gold);
        c += ci;
        p += pi;
        g += gi;
    }
    Prf::from_counts(c, p, g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClsScore {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Indexed by [`Polarity::index`].
    pub per_class: [Prf; 3],
}

/// Accuracy and macro-F1 over the three polarity classes. Classes absent
/// from both sides still count, with F1 0.
pub fn cls_scores(pred: &[Polarity], gold: &[Polarity]) -> Result<ClsScore> {
    if pred.len() != gold.len() {
        return Err(Error::shape("label lists", gold.len(), pred.len()));
    }
    if gold.is_empty() {
        return Err(Error::Empty("label lists"));
    }
    let correct = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    let per_class = Polarity::ALL.map(|c| {
        let tp = pred.iter().zip(gold).filter(|(p, g)| **p == c && **g == c).count();
        let np = pred.iter().filter(|p| **p == c).count();
        let ng = gold.iter().filter(|g| **g == c).count();
        Prf::from_counts(tp, np, ng)
    });
    Ok(ClsScore {
        accuracy: correct as f64 / gold.len() as f64,
        macro_f1: per_class.iter().map(|p| p.f1).sum::<f64>() / 3.0,
        per_class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation. An empty slice gives zeros.
pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd { mean: 0.0, std: 0.0 };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: libm::sqrt(var),
    }
}

/// Per-metric mean ± std across repeated runs. Each run maps metric name to value.
pub fn aggregate(runs: &[BTreeMap<String, f64>]) -> Result<BTreeMap<String, MeanStd>> {
    if runs.is_empty() {
        return Err(Error::Empty("runs"));
    }
    let mut names: Vec<&String> = runs.iter().flat_map(|r| r.keys()).collect();
    names.sort();
    names.dedup();
    let mut out = BTreeMap::new();
    for name in names {
        let vals: Vec<f64> = runs
            .iter()
            .map(|r| {
                r.get(name).copied().ok_or_else(|| Error::Unknown {
                    kind: "metric in run",
                    name: name.clone(),
                })
            })
            .collect::<Result<_>>()?;
        out.insert(name.clone(), mean_std(&vals));
    }
    Ok(out)
}
