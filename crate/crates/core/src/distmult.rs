//! DistMult embeddings for a generic triple KB: training with sampled
//! negatives, filtered link-prediction ranking and phrase lookup.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::nn::{prefixed, sigmoid, xavier, Optimizer, Params, Tensor2};
use crate::text::{normalize_phrase, Vocab};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl Triple {
    pub fn new(head: impl Into<String>, relation: impl Into<String>, tail: impl Into<String>) -> Self {
        Triple {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistMultModel {
    pub entities: Vocab,
    pub relations: Vocab,
    /// |E|×d
    pub entity_vectors: Tensor2,
    /// |R|×d diagonal relation weights.
    pub relation_vectors: Tensor2,
}

impl Params for DistMultModel {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = prefixed("entity", vec![("table".into(), &self.entity_vectors)]);
        out.extend(prefixed("relation", vec![("table".into(), &self.relation_vectors)]));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![&mut self.entity_vectors, &mut self.relation_vectors]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistMultConfig {
    pub dim: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for DistMultConfig {
    fn default() -> Self {
        DistMultConfig {
            dim: 16,
            epochs: 100,
            negatives: 8,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

/// One scored example: (head, relation, tail) ids and a 0/1 label.
pub type Sample = (usize, usize, usize, f64);

impl DistMultModel {
    pub fn dim(&self) -> usize {
        self.entity_vectors.cols()
    }

    pub fn entity_id(&self, name: &str) -> Result<usize> {
        self.entities.id(name).ok_or_else(|| Error::Unknown {
            kind: "entity",
            name: name.into(),
        })
    }

    pub fn relation_id(&self, name: &str) -> Result<usize> {
        self.relations.id(name).ok_or_else(|| Error::Unknown {
            kind: "relation",
            name: name.into(),
        })
    }

    pub fn ids(&self, t: &Triple) -> Result<(usize, usize, usize)> {
        Ok((self.entity_id(&t.head)?, self.relation_id(&t.relation)?, self.entity_id(&t.tail)?))
    }

    pub fn score_ids(&self, h: usize, r: usize, t: usize) -> f64 {
        let eh = self.entity_vectors.row(h);
        let wr = self.relation_vectors.row(r);
        let et = self.entity_vectors.row(t);
        // head·tail first so swapping them is exact in floating point
        eh.iter().zip(et).zip(wr).map(|((a, c), w)| (a * c) * w).sum()
    }

    /// Summed logistic loss over `samples` and its gradient.
    pub fn loss_and_grad(&self, samples: &[Sample]) -> Result<(f64, DistMultModel)> {
        let mut grad = self.zeros_like();
        let loss = self.accumulate(samples, 1.0, &mut grad);
        if !loss.is_finite() {
            return Err(Error::NonFinite("distmult loss"));
        }
        Ok((loss, grad))
    }

    fn accumulate(&self, samples: &[Sample], weight: f64, grad: &mut DistMultModel) -> f64 {
        let mut loss = 0.0;
        for &(h, r, t, y) in samples {
            let s = self.score_ids(h, r, t);
            // -y log σ(s) - (1-y) log(1-σ(s)) with a stable softplus
            let z = if y > 0.5 { -s } else { s };
            loss += weight * (z.max(0.0) + libm::log1p(libm::exp(-z.abs())));
            let ds = weight * (sigmoid(s) - y);
            let eh = self.entity_vectors.row(h).to_vec();
            let wr = self.relation_vectors.row(r).to_vec();
            let et = self.entity_vectors.row(t).to_vec();
            for k in 0..eh.len() {
                grad.entity_vectors.row_mut(h)[k] += ds * wr[k] * et[k];
                grad.entity_vectors.row_mut(t)[k] += ds * wr[k] * eh[k];
                grad.relation_vectors.row_mut(r)[k] += ds * eh[k] * et[k];
            }
        }
        loss
    }
}

pub fn score(model: &DistMultModel, triple: &Triple) -> Result<f64> {
    let (h, r, t) = model.ids(triple)?;
    Ok(model.score_ids(h, r, t))
}

/// Trains and returns the model with the mean per-positive loss of each epoch.
pub fn train_distmult_logged(triples: &[Triple], config: &DistMultConfig) -> Result<(DistMultModel, Vec<f64>)> {
    if triples.is_empty() {
        return Err(Error::Empty("triples"));
    }
    if config.dim == 0 {
        return Err(Error::invalid("distmult dimension must be at least 1"));
    }
    let entities = Vocab::new(&[], triples.iter().flat_map(|t| [t.head.clone(), t.tail.clone()]));
    let relations = Vocab::new(&[], triples.iter().map(|t| t.relation.clone()));
    let mut rng = crate::rng(config.seed);
    let mut model = DistMultModel {
        entity_vectors: xavier(entities.len(), config.dim, &mut rng),
        relation_vectors: xavier(relations.len(), config.dim, &mut rng),
        entities,
        relations,
    };
    let positives: Vec<(usize, usize, usize)> = triples.iter().map(|t| model.ids(t)).collect::<Result<_>>()?;
    let n_ent = model.entities.len();
    let mut opt = Optimizer::adam(config.learning_rate)?;
    let mut grad = model.zeros_like();
    let mut order: Vec<usize> = (0..positives.len()).collect();
    let neg_weight = if config.negatives == 0 {
        0.0
    } else {
        1.0 / config.negatives as f64
    };
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let (h, r, t) = positives[i];
            let mut negs = Vec::with_capacity(config.negatives);
            for _ in 0..config.negatives {
                let e = rng.gen_range(0..n_ent);
                if rng.gen_bool(0.5) {
                    negs.push((e, r, t, 0.0));
                } else {
                    negs.push((h, r, e, 0.0));
                }
            }
            grad.zero();
            epoch_loss += model.accumulate(&[(h, r, t, 1.0)], 1.0, &mut grad);
            epoch_loss += model.accumulate(&negs, neg_weight, &mut grad);
            opt.step(&mut model, &grad)?;
        }
        let mean = epoch_loss / positives.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite("distmult loss"));
        }
        history.push(mean);
    }
    Ok((model, history))
}

pub fn train_distmult(triples: &[Triple], config: &DistMultConfig) -> Result<DistMultModel> {
    train_distmult_logged(triples, config).map(|(m, _)| m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_10: f64,
}

/// Filtered tail rank of one triple: 1 + number of non-positive candidate
/// tails scoring strictly higher than the true tail.
pub fn filtered_rank(model: &DistMultModel, h: usize, r: usize, t: usize, known: &BTreeSet<(usize, usize, usize)>) -> usize {
    let target = model.score_ids(h, r, t);
    let mut rank = 1;
    for e in 0..model.entities.len() {
        if e != t && !known.contains(&(h, r, e)) && model.score_ids(h, r, e) > target {
            rank += 1;
        }
    }
    rank
}

pub fn rank_eval(model: &DistMultModel, test: &[Triple], all: &[Triple]) -> Result<RankMetrics> {
    if test.is_empty() {
        return Err(Error::Empty("test triples"));
    }
    let known: BTreeSet<(usize, usize, usize)> = all.iter().filter_map(|t| model.ids(t).ok()).collect();
    let (mut rr, mut h1, mut h10) = (0.0, 0usize, 0usize);
    for triple in test {
        let (h, r, t) = model.ids(triple)?;
        let rank = filtered_rank(model, h, r, t, &known);
        rr += 1.0 / rank as f64;
        h1 += usize::from(rank <= 1);
        h10 += usize::from(rank <= 10);
    }
    let n = test.len() as f64;
    Ok(RankMetrics {
        mrr: rr / n,
        hits_at_1: h1 as f64 / n,
        hits_at_10: h10 as f64 / n,
    })
}

/// Entity row of the normalized phrase, else the mean of the rows of its
/// words that are entities, else zeros.
pub fn phrase_vector(model: &DistMultModel, phrase: &str) -> Vec<f64> {
    let norm = normalize_phrase(phrase);
    if let Some(id) = model.entities.id(&norm) {
        return model.entity_vectors.row(id).to_vec();
    }
    let mut out = vec![0.0; model.dim()];
    let rows: Vec<usize> = norm.split_whitespace().filter_map(|w| model.entities.id(w)).collect();
    if rows.is_empty() {
        return out;
    }
    for &id in &rows {
        for (o, v) in out.iter_mut().zip(model.entity_vectors.row(id)) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= rows.len() as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use alloc::format;
    use proptest::prelude::*;

    fn model_with(entities: &[&str], relations: &[&str], ent: Vec<f64>, rel: Vec<f64>, d: usize) -> DistMultModel {
        DistMultModel {
            entities: Vocab::from_words(entities.iter().map(|s| String::from(*s)).collect()),
            relations: Vocab::from_words(relations.iter().map(|s| String::from(*s)).collect()),
            entity_vectors: Tensor2::new(entities.len(), d, ent).unwrap(),
            relation_vectors: Tensor2::new(relations.len(), d, rel).unwrap(),
        }
    }

    #[test]
    fn score_algebra() {
        let m = model_with(&["a", "b"], &["r"], vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 1.0], 2);
        assert_eq!(score(&m, &Triple::new("a", "r", "a")).unwrap(), 1.0);
        assert_eq!(score(&m, &Triple::new("a", "r", "b")).unwrap(), 0.0);
        let z = model_with(&["a", "b"], &["r"], vec![1.0, 2.0, 3.0, 4.0], vec![0.0, 0.0], 2);
        assert_eq!(score(&z, &Triple::new("a", "r", "b")).unwrap(), 0.0);
        let err = score(&m, &Triple::new("a", "r", "zzz")).unwrap_err();
        assert!(format!("{err}").contains("zzz"));
    }

    #[test]
    fn loss_grad_checks() {
        let triples = [Triple::new("a", "r", "b"), Triple::new("b", "s", "c"), Triple::new("c", "r", "a")];
        let m = train_distmult(&triples, &DistMultConfig { dim: 4, epochs: 0, ..Default::default() }).unwrap();
        let samples: Vec<Sample> = vec![(0, 0, 1, 1.0), (1, 1, 2, 1.0), (2, 0, 0, 1.0), (0, 0, 2, 0.0), (1, 1, 1, 0.0)];
        let report = grad_check(&m, |m| m.loss_and_grad(&samples), 1e-3).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn rank_eval_brute_force() {
        // three entities on a line; relation weight 1
        let m = model_with(&["a", "b", "c"], &["r"], vec![1.0, 0.5, -1.0], vec![1.0], 1);
        let all = [Triple::new("a", "r", "b"), Triple::new("a", "r", "c")];
        // a-r-a scores 1 > a-r-b 0.5, a-r-c is filtered: rank 2
        let test = [Triple::new("a", "r", "b")];
        let r = rank_eval(&m, &test, &all).unwrap();
        assert_eq!(r.mrr, 0.5);
        assert_eq!(r.hits_at_1, 0.0);
        // unfiltered a-r-c: beaten by a and b: rank 3; filtered keeps b: still rank 3
        let test = [Triple::new("a", "r", "c")];
        assert!((rank_eval(&m, &test, &test).unwrap().mrr - 1.0 / 3.0).abs() < 1e-12);
        assert!(rank_eval(&m, &[], &all).is_err());

        let single = model_with(&["a"], &["r"], vec![0.3], vec![0.1], 1);
        let t = [Triple::new("a", "r", "a")];
        assert_eq!(rank_eval(&single, &t, &t).unwrap().mrr, 1.0);
    }

    #[test]
    fn phrase_fallbacks() {
        let m = model_with(&["thin walls", "thin", "walls"], &["r"], vec![1.0, 1.0, 2.0, 0.0, 0.0, 4.0], vec![1.0, 1.0], 2);
        assert_eq!(phrase_vector(&m, "Thin  Walls"), vec![1.0, 1.0]);
        assert_eq!(phrase_vector(&m, "walls thin"), vec![1.0, 2.0]);
        assert_eq!(phrase_vector(&m, "walls only"), vec![0.0, 4.0]);
        assert_eq!(phrase_vector(&m, "nothing here"), vec![0.0, 0.0]);
    }

    #[test]
    fn training_errors_and_determinism() {
        assert!(train_distmult(&[], &DistMultConfig::default()).is_err());
        let t = [Triple::new("a", "r", "b")];
        assert!(train_distmult(&t, &DistMultConfig { dim: 0, ..Default::default() }).is_err());
        let cfg = DistMultConfig { dim: 4, epochs: 5, ..Default::default() };
        assert_eq!(train_distmult(&t, &cfg).unwrap(), train_distmult(&t, &cfg).unwrap());
    }

    proptest! {
        #[test]
        fn score_symmetric(seed in 0u64..1000, h in 0usize..5, t in 0usize..5) {
            let triples: Vec<Triple> = (0..5).map(|i| Triple::new(format!("e{i}"), "r", format!("e{}", (i + 1) % 5))).collect();
            let m = train_distmult(&triples, &DistMultConfig { dim: 6, epochs: 0, seed, ..Default::default() }).unwrap();
            prop_assert_eq!(m.score_ids(h, 0, t), m.score_ids(t, 0, h));
        }
    }
}
