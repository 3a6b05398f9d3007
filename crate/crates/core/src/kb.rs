//! Knowledge base construction from per-entity opinion counts.
//!
//! Opinion tuples are counted per entity into an [`ExtractionMatrix`] (and the
//! finer [`ModifierAspectTensor`]). After restricting to the most reviewed
//! entities and most frequent opinions, premise → conclusion facts are mined
//! from entity-level co-occurrence with normalized PMI.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use crate::extract::Opinion;
use crate::extract::OpinionTuple;
use crate::text::{EdgeList, Review};
use crate::{Error, Result};

/// Counts per `(entity, opinion)`. Absent keys mean zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractionMatrix {
    counts: BTreeMap<(String, Opinion), u64>,
}

impl ExtractionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, entity: &str, opinion: Opinion, n: u64) {
        if n > 0 {
            *self.counts.entry((String::from(entity), opinion)).or_insert(0) += n;
        }
    }

    pub fn get(&self, entity: &str, opinion: &Opinion) -> u64 {
        self.counts
            .get(&(String::from(entity), opinion.clone()))
            .copied()
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Opinion, u64)> {
        self.counts.iter().map(|((e, o), &c)| (e.as_str(), o, c))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of nonzero cells.
    pub fn nnz(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn entities(&self) -> BTreeSet<&str> {
        self.counts.keys().map(|(e, _)| e.as_str()).collect()
    }

    pub fn opinions(&self) -> BTreeSet<&Opinion> {
        self.counts.keys().map(|(_, o)| o).collect()
    }

    pub fn entity_totals(&self) -> BTreeMap<&str, u64> {
        let mut out = BTreeMap::new();
        for (e, _, c) in self.iter() {
            *out.entry(e).or_insert(0) += c;
        }
        out
    }

    pub fn opinion_totals(&self) -> BTreeMap<&Opinion, u64> {
        let mut out = BTreeMap::new();
        for (_, o, c) in self.iter() {
            *out.entry(o).or_insert(0) += c;
        }
        out
    }

    pub fn restrict(&self, entities: &BTreeSet<String>, opinions: &BTreeSet<Opinion>) -> Self {
        ExtractionMatrix {
            counts: self
                .counts
                .iter()
                .filter(|((e, o), _)| entities.contains(e) && opinions.contains(o))
                .map(|(k, &c)| (k.clone(), c))
                .collect(),
        }
    }
}

/// Counts per `(entity, modifier, aspect)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModifierAspectTensor {
    counts: BTreeMap<(String, String, String), u64>,
}

impl ModifierAspectTensor {
    pub fn get(&self, entity: &str, modifier: &str, aspect: &str) -> u64 {
        self.counts
            .get(&(entity.into(), modifier.into(), aspect.into()))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &str, u64)> {
        self.counts
            .iter()
            .map(|((e, m, a), &c)| (e.as_str(), m.as_str(), a.as_str(), c))
    }

    /// Sums over `(modifier, aspect)` joint keys, giving matrix-shaped counts.
    pub fn marginalize(&self) -> ExtractionMatrix {
        let mut m = ExtractionMatrix::new();
        for (e, modifier, aspect, c) in self.iter() {
            m.add(e, Opinion::new(modifier, aspect), c);
        }
        m
    }
}

/// Counts every tuple occurrence once. `tuples[i]` holds the tuples of
/// `reviews[i]`, across all its sentences.
pub fn build_matrix(
    reviews: &[Review],
    tuples: &[Vec<OpinionTuple>],
) -> Result<(ExtractionMatrix, ModifierAspectTensor)> {
    if reviews.len() != tuples.len() {
        return Err(Error::shape("tuples per review", reviews.len(), tuples.len()));
    }
    let mut matrix = ExtractionMatrix::new();
    let mut tensor = ModifierAspectTensor::default();
    for (review, ts) in reviews.iter().zip(tuples) {
        for t in ts {
            let op = t.opinion();
            *tensor
                .counts
                .entry((review.entity_id.clone(), op.modifier.clone(), op.aspect.clone()))
                .or_insert(0) += 1;
            matrix.add(&review.entity_id, op, 1);
        }
    }
    Ok((matrix, tensor))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub entities: Vec<String>,
    pub opinions: Vec<Opinion>,
    pub matrix: ExtractionMatrix,
}

/// Keeps the `top_entities` entities with the most tuples and the
/// `top_extractions` most frequent opinions (corpus-wide). Ties are broken
/// lexicographically. Asking for more than exist returns everything.
pub fn select(matrix: &ExtractionMatrix, top_entities: usize, top_extractions: usize) -> Result<Selection> {
    if top_entities == 0 || top_extractions == 0 {
        return Err(Error::invalid("selection sizes must be at least 1"));
    }
    let mut ents: Vec<(&str, u64)> = matrix.entity_totals().into_iter().collect();
    ents.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ents.truncate(top_entities);
    let mut ops: Vec<(&Opinion, u64)> = matrix.opinion_totals().into_iter().collect();
    ops.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ops.truncate(top_extractions);

    let entities: Vec<String> = ents.into_iter().map(|(e, _)| String::from(e)).collect();
    let opinions: Vec<Opinion> = ops.into_iter().map(|(o, _)| o.clone()).collect();
    let restricted = matrix.restrict(
        &entities.iter().cloned().collect(),
        &opinions.iter().cloned().collect(),
    );
    Ok(Selection {
        entities,
        opinions,
        matrix: restricted,
    })
}

/// Normalized PMI of two events from presence counts over `n` trials.
/// Returns -1 when they never co-occur and 1 when they always do.
pub fn npmi(n_a: usize, n_b: usize, n_ab: usize, n: usize) -> f64 {
    if n_ab == 0 || n == 0 {
        return -1.0;
    }
    if n_ab == n {
        return 1.0;
    }
    // ratios of counts rather than of probabilities, so that
    // n_a == n_b == n_ab gives exactly 1
    let (n, n_a, n_b, n_ab) = (n as f64, n_a as f64, n_b as f64, n_ab as f64);
    let v = libm::log((n * n_ab) / (n_a * n_b)) / libm::log(n / n_ab);
    v.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub premise: Opinion,
    pub conclusion: Opinion,
    pub weight: f64,
}

/// Mines facts from entity-level co-occurrence. A pair qualifies when both
/// opinions appear in at least `min_support` common entities and their NPMI
/// reaches `npmi_threshold`. The less frequent opinion (by total count;
/// lexicographically smaller on ties) becomes the premise.
pub fn mine_facts(matrix: &ExtractionMatrix, npmi_threshold: f64, min_support: usize) -> Result<Vec<Fact>> {
    if !(npmi_threshold > 0.0 && npmi_threshold < 1.0) {
        return Err(Error::invalid(alloc::format!(
            "npmi threshold {npmi_threshold} outside (0, 1)"
        )));
    }
    if min_support == 0 {
        return Err(Error::invalid("min_support must be at least 1"));
    }
    let n = matrix.entities().len();
    let totals = matrix.opinion_totals();
    let mut presence: BTreeMap<&Opinion, BTreeSet<&str>> = BTreeMap::new();
    for (e, o, _) in matrix.iter() {
        presence.entry(o).or_default().insert(e);
    }
    let ops: Vec<(&Opinion, &BTreeSet<&str>)> = presence.iter().map(|(o, s)| (*o, s)).collect();
    let mut facts = Vec::new();
    for (i, (a, sa)) in ops.iter().enumerate() {
        for (b, sb) in &ops[i + 1..] {
            let n_ab = sa.intersection(sb).count();
            if n_ab < min_support {
                continue;
            }
            let v = npmi(sa.len(), sb.len(), n_ab, n);
            if v < npmi_threshold {
                continue;
            }
            // `a < b` by construction
            let (premise, conclusion) = if totals[b] < totals[a] { (b, a) } else { (a, b) };
            facts.push(Fact {
                premise: (*premise).clone(),
                conclusion: (*conclusion).clone(),
                weight: v,
            });
        }
    }
    facts.sort_by(|x, y| {
        x.premise
            .cmp(&y.premise)
            .then_with(|| x.conclusion.cmp(&y.conclusion))
    });
    Ok(facts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub domain_name: String,
    /// Sorted, unique.
    pub opinions: Vec<Opinion>,
    pub facts: Vec<Fact>,
}

impl KnowledgeBase {
    /// KB whose opinion set is exactly the fact endpoints.
    pub fn from_facts(domain_name: impl Into<String>, facts: Vec<Fact>) -> Result<Self> {
        let opinions: BTreeSet<Opinion> = facts
            .iter()
            .flat_map(|f| [f.premise.clone(), f.conclusion.clone()])
            .collect();
        Self::from_parts(domain_name, opinions.into_iter().collect(), facts)
    }

    pub fn from_parts(domain_name: impl Into<String>, opinions: Vec<Opinion>, facts: Vec<Fact>) -> Result<Self> {
        let set: BTreeSet<Opinion> = opinions.into_iter().collect();
        for f in &facts {
            if f.premise == f.conclusion {
                return Err(Error::invalid(alloc::format!(
                    "fact premise equals conclusion `{}`",
                    f.premise.key()
                )));
            }
            for end in [&f.premise, &f.conclusion] {
                if !set.contains(end) {
                    return Err(Error::Unknown {
                        kind: "opinion",
                        name: end.key(),
                    });
                }
            }
            if !(f.weight > 0.0 && f.weight <= 1.0) {
                return Err(Error::invalid(alloc::format!("fact weight {} outside (0, 1]", f.weight)));
            }
        }
        Ok(KnowledgeBase {
            domain_name: domain_name.into(),
            opinions: set.into_iter().collect(),
            facts,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.opinions.is_empty()
    }
}

/// Percentage of KB opinions whose `"modifier aspect"` key is an edge-list node.
pub fn extraction_overlap(kb: &KnowledgeBase, edges: &EdgeList) -> Result<f64> {
    if kb.is_empty() {
        return Err(Error::EmptyKnowledgeBase);
    }
    let found = kb.opinions.iter().filter(|o| edges.has_node(&o.key())).count();
    Ok(100.0 * found as f64 / kb.opinions.len() as f64)
}

/// A fact is derivable from the edge list when its aspects are linked and
/// so is at least one of (premise modifier, conclusion modifier),
/// (premise modifier, conclusion aspect) or (conclusion modifier, premise
/// aspect).
pub fn fact_derivable(fact: &Fact, edges: &EdgeList) -> bool {
    let (p, c) = (&fact.premise, &fact.conclusion);
    edges.has_edge(&p.aspect, &c.aspect)
        && (edges.has_edge(&p.modifier, &c.modifier)
            || edges.has_edge(&p.modifier, &c.aspect)
            || edges.has_edge(&c.modifier, &p.aspect))
}

/// Percentage of facts derivable from the edge list; 0 when the KB has no facts.
pub fn relation_overlap(kb: &KnowledgeBase, edges: &EdgeList) -> Result<f64> {
    if kb.is_empty() {
        return Err(Error::EmptyKnowledgeBase);
    }
    if kb.facts.is_empty() {
        return Ok(0.0);
    }
    let found = kb.facts.iter().filter(|f| fact_derivable(f, edges)).count();
    Ok(100.0 * found as f64 / kb.facts.len() as f64)
}

/// One column of the KB statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbStats {
    pub domain: String,
    pub n_entities: usize,
    pub n_extractions: usize,
    pub n_unique_opinions: usize,
    pub n_facts: usize,
    pub extraction_overlap: f64,
    pub relation_overlap: f64,
}

pub const KB_STATS_FIELDS: [&str; 7] = [
    "domain",
    "n_entities",
    "n_extractions",
    "n_unique_opinions",
    "n_facts",
    "extraction_overlap",
    "relation_overlap",
];

/// `matrix` is the selected (restricted) matrix the KB was mined from.
pub fn stats(kb: &KnowledgeBase, matrix: &ExtractionMatrix, edges: &EdgeList) -> Result<KbStats> {
    Ok(KbStats {
        domain: kb.domain_name.clone(),
        n_entities: matrix.entities().len(),
        n_extractions: matrix.opinions().len(),
        n_unique_opinions: kb.opinions.len(),
        n_facts: kb.facts.len(),
        extraction_overlap: extraction_overlap(kb, edges)?,
        relation_overlap: relation_overlap(kb, edges)?,
    })
}
