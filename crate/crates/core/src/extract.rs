//! Opinion tuple extraction.
//!
//! Two routes produce `(modifier, aspect)` tuples from a sentence: a
//! lexicon-driven rule extractor, and a BIO sequence tagger (structured
//! averaged perceptron, Viterbi decoding) followed by a nearest-distance
//! pairing step.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::text::{Review, TokenSequence, TokenSpan};
use crate::{Error, Result};

const INTENSIFIERS: &[&str] = &[
    "very", "really", "so", "too", "quite", "extremely", "super", "pretty", "incredibly", "rather",
];
const COPULAS: &[&str] = &[
    "is", "was", "are", "were", "be", "been", "seems", "seemed", "looks", "looked", "feels", "felt",
];

/// A normalized `(modifier, aspect)` pair. Keys and ordering use
/// `"modifier aspect"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Opinion {
    pub modifier: String,
    pub aspect: String,
}

impl Opinion {
    pub fn new(modifier: &str, aspect: &str) -> Self {
        Opinion {
            modifier: crate::text::normalize_phrase(modifier),
            aspect: crate::text::normalize_phrase(aspect),
        }
    }

    pub fn key(&self) -> String {
        format!("{} {}", self.modifier, self.aspect)
    }
}

impl Ord for Opinion {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.key()
            .cmp(&other.key())
            .then_with(|| self.modifier.cmp(&other.modifier))
    }
}

impl PartialOrd for Opinion {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionTuple {
    pub modifier: String,
    pub aspect: String,
    pub sentence_index: usize,
    pub modifier_span: TokenSpan,
    pub aspect_span: TokenSpan,
}

impl OpinionTuple {
    fn from_spans(sentence: &TokenSequence, idx: usize, modifier: TokenSpan, aspect: TokenSpan) -> Self {
        OpinionTuple {
            modifier: sentence.phrase(modifier),
            aspect: sentence.phrase(aspect),
            sentence_index: idx,
            modifier_span: modifier,
            aspect_span: aspect,
        }
    }

    pub fn opinion(&self) -> Opinion {
        Opinion::new(&self.modifier, &self.aspect)
    }

    pub fn key(&self) -> String {
        self.opinion().key()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub adjectives: BTreeSet<String>,
    pub aspect_nouns: BTreeSet<String>,
}

impl Lexicon {
    pub fn new<A, B>(adjectives: A, aspect_nouns: B) -> Self
    where
        A: IntoIterator,
        A::Item: AsRef<str>,
        B: IntoIterator,
        B::Item: AsRef<str>,
    {
        Lexicon {
            adjectives: adjectives.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
            aspect_nouns: aspect_nouns.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn is_adjective(&self, w: &str) -> bool {
        self.adjectives.contains(w)
    }

    pub fn is_aspect(&self, w: &str) -> bool {
        self.aspect_nouns.contains(w)
    }
}

fn is_intensifier(w: &str) -> bool {
    INTENSIFIERS.contains(&w)
}

/// Maximal runs of consecutive tokens satisfying `pred`.
fn runs(words: &[String], pred: impl Fn(&str) -> bool) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        if pred(&words[i]) {
            let start = i;
            while i + 1 < words.len() && pred(&words[i + 1]) {
                i += 1;
            }
            out.push(TokenSpan::new(start, i));
        }
        i += 1;
    }
    out
}

/// Tuples for every aspect run that has a modifier run directly before it
/// (`very clean bathroom`) or right after a copula (`bathroom is very
/// clean`). Modifier runs are maximal adjective runs, optionally led by
/// intensifiers. Output follows aspect position.
pub fn extract_rule_based(sentence: &TokenSequence, lexicon: &Lexicon) -> Vec<OpinionTuple> {
    extract_rule_based_at(sentence, 0, lexicon)
}

fn extract_rule_based_at(sentence: &TokenSequence, idx: usize, lexicon: &Lexicon) -> Vec<OpinionTuple> {
    let words: Vec<String> = sentence.tokens.iter().map(|t| t.lower()).collect();
    let aspects = runs(&words, |w| lexicon.is_aspect(w));
    let modifiers: Vec<TokenSpan> = runs(&words, |w| {
        (lexicon.is_adjective(w) || is_intensifier(w)) && !lexicon.is_aspect(w)
    })
    .into_iter()
    .filter_map(|span| {
        // trailing intensifiers do not modify anything
        let mut end = span.end;
        while end > span.start && !lexicon.is_adjective(&words[end]) {
            end -= 1;
        }
        lexicon
            .is_adjective(&words[end])
            .then(|| TokenSpan::new(span.start, end))
    })
    .collect();

    let mut used = vec![false; modifiers.len()];
    let mut out = Vec::new();
    for asp in aspects {
        let before = modifiers
            .iter()
            .position(|m| m.end + 1 == asp.start)
            .filter(|&k| !used[k]);
        let after_copula = || {
            let cop = asp.end + 1;
            if cop < words.len() && COPULAS.contains(&words[cop].as_str()) {
                modifiers.iter().position(|m| m.start == cop + 1).filter(|&k| !used[k])
            } else {
                None
            }
        };
        if let Some(k) = before.or_else(after_copula) {
            used[k] = true;
            out.push(OpinionTuple::from_spans(sentence, idx, modifiers[k], asp));
        }
    }
    out
}

/// Tuple-producing front end used by the pipeline.
#[derive(Debug, Clone)]
pub enum Extractor {
    Rules(Lexicon),
    Tagger(TaggerModel),
}

impl Extractor {
    pub fn extract(&self, sentence: &TokenSequence, sentence_index: usize) -> Vec<OpinionTuple> {
        match self {
            Extractor::Rules(lex) => extract_rule_based_at(sentence, sentence_index, lex),
            Extractor::Tagger(model) => {
                let tags = tag(model, sentence);
                let mut tuples = pair(&tags, sentence);
                for t in &mut tuples {
                    t.sentence_index = sentence_index;
                }
                tuples
            }
        }
    }

    /// One tuple list per sentence of `review`.
    pub fn extract_review(&self, review: &Review) -> Vec<Vec<OpinionTuple>> {
        review
            .sentences
            .iter()
            .enumerate()
            .map(|(i, s)| self.extract(s, i))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "O")]
    O,
    #[serde(rename = "B-ASP")]
    BAsp,
    #[serde(rename = "I-ASP")]
    IAsp,
    #[serde(rename = "B-MOD")]
    BMod,
    #[serde(rename = "I-MOD")]
    IMod,
}

pub const N_LABELS: usize = 5;
const START: usize = N_LABELS;

impl Label {
    pub const ALL: [Label; N_LABELS] = [Label::O, Label::BAsp, Label::IAsp, Label::BMod, Label::IMod];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::O => "O",
            Label::BAsp => "B-ASP",
            Label::IAsp => "I-ASP",
            Label::BMod => "B-MOD",
            Label::IMod => "I-MOD",
        }
    }

    fn bio(self, kind: SpanKind) -> BioTag {
        match (self, kind) {
            (Label::BAsp, SpanKind::Aspect) | (Label::BMod, SpanKind::Modifier) => BioTag::B,
            (Label::IAsp, SpanKind::Aspect) | (Label::IMod, SpanKind::Modifier) => BioTag::I,
            _ => BioTag::O,
        }
    }
}

impl core::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "label",
                name: s.to_string(),
            })
    }
}

/// Whether `next` may follow `prev` (`None` = sentence start) in a valid BIO sequence.
pub fn transition_allowed(prev: Option<Label>, next: Label) -> bool {
    match next {
        Label::IAsp => matches!(prev, Some(Label::BAsp | Label::IAsp)),
        Label::IMod => matches!(prev, Some(Label::BMod | Label::IMod)),
        _ => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanKind {
    Aspect,
    Modifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence {
    pub labels: Vec<Label>,
}

impl TagSequence {
    pub fn all_o(n: usize) -> Self {
        TagSequence { labels: vec![Label::O; n] }
    }

    pub fn is_well_formed(&self) -> bool {
        let mut prev = None;
        for &l in &self.labels {
            if !transition_allowed(prev, l) {
                return false;
            }
            prev = Some(l);
        }
        true
    }

    /// Spans of one kind; orphan `I-x` tags open a new span.
    pub fn spans(&self, kind: SpanKind) -> Vec<TokenSpan> {
        let tags: Vec<BioTag> = self.labels.iter().map(|l| l.bio(kind)).collect();
        bio_spans(&tags)
    }

    /// BIO labels covering the given tuples; remaining tokens are `O`.
    pub fn from_tuples(len: usize, tuples: &[OpinionTuple]) -> Self {
        let mut labels = vec![Label::O; len];
        for t in tuples {
            for (span, b, i) in [
                (t.aspect_span, Label::BAsp, Label::IAsp),
                (t.modifier_span, Label::BMod, Label::IMod),
            ] {
                labels[span.start] = b;
                for l in &mut labels[span.start + 1..=span.end] {
                    *l = i;
                }
            }
        }
        TagSequence { labels }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BioTag {
    B,
    I,
    O,
}

/// Decodes BIO tags to inclusive spans. An `I` with no open span is
/// promoted to `B`.
pub fn bio_spans(tags: &[BioTag]) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &t) in tags.iter().enumerate() {
        match t {
            BioTag::B => {
                if let Some(s) = open.take() {
                    out.push(TokenSpan::new(s, i - 1));
                }
                open = Some(i);
            }
            BioTag::I => {
                if open.is_none() {
                    open = Some(i);
                }
            }
            BioTag::O => {
                if let Some(s) = open.take() {
                    out.push(TokenSpan::new(s, i - 1));
                }
            }
        }
    }
    if let Some(s) = open {
        out.push(TokenSpan::new(s, tags.len() - 1));
    }
    out
}

/// Feature strings for token `i`.
fn features(words: &[String], i: usize, lexicon: Option<&Lexicon>) -> Vec<String> {
    let w = &words[i];
    let prev = if i == 0 { "<s>" } else { words[i - 1].as_str() };
    let next = words.get(i + 1).map_or("</s>", String::as_str);
    let chars: Vec<char> = w.chars().collect();
    let suffix: String = chars[chars.len().saturating_sub(3)..].iter().collect();
    let mut f = vec![
        String::from("bias"),
        format!("w={w}"),
        format!("p={prev}"),
        format!("n={next}"),
        format!("suf={suffix}"),
    ];
    if !w.is_empty() && w.chars().all(|c| c.is_ascii_punctuation()) {
        f.push(String::from("punct"));
    }
    if let Some(lex) = lexicon {
        if lex.is_adjective(w) {
            f.push(String::from("lex=adj"));
        }
        if lex.is_aspect(w) {
            f.push(String::from("lex=asp"));
        }
        if is_intensifier(w) {
            f.push(String::from("lex=int"));
        }
        if lex.is_adjective(next) {
            f.push(String::from("lex=next_adj"));
        }
        if lex.is_aspect(next) {
            f.push(String::from("lex=next_asp"));
        }
    }
    f
}

fn sentence_features(sentence: &TokenSequence, lexicon: Option<&Lexicon>) -> Vec<Vec<String>> {
    let words: Vec<String> = sentence.tokens.iter().map(|t| t.lower()).collect();
    (0..words.len()).map(|i| features(&words, i, lexicon)).collect()
}

/// Structured perceptron weights after averaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub features: BTreeMap<String, [f64; N_LABELS]>,
    /// Rows are previous labels, the last row is the sentence start.
    pub transitions: [[f64; N_LABELS]; N_LABELS + 1],
    pub lexicon: Option<Lexicon>,
}

impl TaggerModel {
    pub fn zero(lexicon: Option<Lexicon>) -> Self {
        TaggerModel {
            features: BTreeMap::new(),
            transitions: [[0.0; N_LABELS]; N_LABELS + 1],
            lexicon,
        }
    }

    fn emissions(&self, feats: &[Vec<String>]) -> Vec<[f64; N_LABELS]> {
        feats
            .iter()
            .map(|fs| {
                let mut e = [0.0; N_LABELS];
                for f in fs {
                    if let Some(w) = self.features.get(f) {
                        for (acc, x) in e.iter_mut().zip(w) {
                            *acc += x;
                        }
                    }
                }
                e
            })
            .collect()
    }
}

/// Best valid label sequence under `emissions` and `transitions`, with its score.
/// Ties go to the lower label index, so an all-zero model yields all `O`.
pub fn viterbi(
    emissions: &[[f64; N_LABELS]],
    transitions: &[[f64; N_LABELS]; N_LABELS + 1],
) -> (Vec<Label>, f64) {
    let n = emissions.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let mut score = vec![[f64::NEG_INFINITY; N_LABELS]; n];
    let mut back = vec![[0usize; N_LABELS]; n];
    for y in Label::ALL {
        if transition_allowed(None, y) {
            score[0][y.index()] = transitions[START][y.index()] + emissions[0][y.index()];
        }
    }
    for t in 1..n {
        for y in Label::ALL {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for p in Label::ALL {
                if !transition_allowed(Some(p), y) || score[t - 1][p.index()] == f64::NEG_INFINITY {
                    continue;
                }
                let s = score[t - 1][p.index()] + transitions[p.index()][y.index()];
                if s > best {
                    best = s;
                    arg = p.index();
                }
            }
            if best > f64::NEG_INFINITY {
                score[t][y.index()] = best + emissions[t][y.index()];
                back[t][y.index()] = arg;
            }
        }
    }
    let mut last = 0;
    for y in 1..N_LABELS {
        if score[n - 1][y] > score[n - 1][last] {
            last = y;
        }
    }
    let total = score[n - 1][last];
    let mut labels = vec![Label::O; n];
    let mut cur = last;
    for t in (0..n).rev() {
        labels[t] = Label::ALL[cur];
        cur = back[t][cur];
    }
    (labels, total)
}

/// Lazily averaged parameter block.
struct Averaged<const K: usize> {
    weights: [f64; K],
    totals: [f64; K],
    stamps: [u64; K],
}

impl<const K: usize> Averaged<K> {
    fn new() -> Self {
        Averaged {
            weights: [0.0; K],
            totals: [0.0; K],
            stamps: [0; K],
        }
    }

    fn update(&mut self, k: usize, delta: f64, now: u64) {
        self.totals[k] += (now - self.stamps[k]) as f64 * self.weights[k];
        self.stamps[k] = now;
        self.weights[k] += delta;
    }

    fn average(&self, now: u64) -> [f64; K] {
        let mut out = [0.0; K];
        if now == 0 {
            return out;
        }
        for k in 0..K {
            let total = self.totals[k] + (now - self.stamps[k]) as f64 * self.weights[k];
            out[k] = total / now as f64;
        }
        out
    }
}

/// Trains the BIO tagger with a structured averaged perceptron. The
/// sentence order is reshuffled every epoch from `seed`.
pub fn train_tagger(
    labeled: &[(TokenSequence, TagSequence)],
    epochs: usize,
    seed: u64,
    lexicon: Option<&Lexicon>,
) -> Result<TaggerModel> {
    if labeled.is_empty() {
        return Err(Error::Empty("tagger training set"));
    }
    for (i, (s, t)) in labeled.iter().enumerate() {
        if s.len() != t.labels.len() {
            return Err(Error::shape("tagger example", s.len(), t.labels.len()));
        }
        if !t.is_well_formed() {
            return Err(Error::invalid(format!("tag sequence {i} is not well-formed BIO")));
        }
    }
    let feats: Vec<Vec<Vec<String>>> = labeled
        .iter()
        .map(|(s, _)| sentence_features(s, lexicon))
        .collect();

    let mut weights: BTreeMap<String, Averaged<N_LABELS>> = BTreeMap::new();
    let mut trans: Vec<Averaged<N_LABELS>> = (0..=N_LABELS).map(|_| Averaged::new()).collect();
    let mut rng = crate::rng(seed);
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    let mut now: u64 = 0;

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &ix in &order {
            now += 1;
            let emissions: Vec<[f64; N_LABELS]> = feats[ix]
                .iter()
                .map(|fs| {
                    let mut e = [0.0; N_LABELS];
                    for w in fs.iter().filter_map(|f| weights.get(f)) {
                        for (acc, x) in e.iter_mut().zip(&w.weights) {
                            *acc += x;
                        }
                    }
                    e
                })
                .collect();
            let current: [[f64; N_LABELS]; N_LABELS + 1] = core::array::from_fn(|r| trans[r].weights);
            let (guess, _) = viterbi(&emissions, &current);
            let gold = &labeled[ix].1.labels;
            if &guess == gold {
                continue;
            }
            for (t, fs) in feats[ix].iter().enumerate() {
                if guess[t] == gold[t] {
                    continue;
                }
                for f in fs {
                    let w = weights.entry(f.clone()).or_insert_with(Averaged::new);
                    w.update(gold[t].index(), 1.0, now);
                    w.update(guess[t].index(), -1.0, now);
                }
            }
            for t in 0..gold.len() {
                let pg = if t == 0 { START } else { gold[t - 1].index() };
                let pp = if t == 0 { START } else { guess[t - 1].index() };
                if pg == pp && gold[t] == guess[t] {
                    continue;
                }
                trans[pg].update(gold[t].index(), 1.0, now);
                trans[pp].update(guess[t].index(), -1.0, now);
            }
        }
    }

    Ok(TaggerModel {
        features: weights
            .into_iter()
            .map(|(k, v)| (k, v.average(now)))
            .filter(|(_, w)| w.iter().any(|&x| x != 0.0))
            .collect(),
        transitions: core::array::from_fn(|r| trans[r].average(now)),
        lexicon: lexicon.cloned(),
    })
}

pub fn tag(model: &TaggerModel, sentence: &TokenSequence) -> TagSequence {
    let feats = sentence_features(sentence, model.lexicon.as_ref());
    let (labels, _) = viterbi(&model.emissions(&feats), &model.transitions);
    TagSequence { labels }
}

fn gap(a: TokenSpan, b: TokenSpan) -> usize {
    if a.end < b.start {
        b.start - a.end
    } else {
        a.start.saturating_sub(b.end)
    }
}

/// Links aspect spans to modifier spans, closest pairs first. At equal
/// distance a modifier that precedes its aspect wins. Each span is used at
/// most once; unpaired spans are dropped. Output is sorted by aspect start.
pub fn pair(tagged: &TagSequence, sentence: &TokenSequence) -> Vec<OpinionTuple> {
    let aspects = tagged.spans(SpanKind::Aspect);
    let modifiers = tagged.spans(SpanKind::Modifier);
    let mut candidates = Vec::new();
    for (ai, a) in aspects.iter().enumerate() {
        for (mi, m) in modifiers.iter().enumerate() {
            if a.overlaps(m) {
                continue;
            }
            let follows = m.start > a.end;
            candidates.push((gap(*a, *m), follows, a.start, m.start, ai, mi));
        }
    }
    candidates.sort_unstable();
    let mut aspect_used = vec![false; aspects.len()];
    let mut modifier_used = vec![false; modifiers.len()];
    let mut out = Vec::new();
    for (_, _, _, _, ai, mi) in candidates {
        if aspect_used[ai] || modifier_used[mi] {
            continue;
        }
        aspect_used[ai] = true;
        modifier_used[mi] = true;
        out.push(OpinionTuple::from_spans(sentence, 0, modifiers[mi], aspects[ai]));
    }
    out.sort_by_key(|t| t.aspect_span.start);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;
    use proptest::prelude::*;

    fn lexicon() -> Lexicon {
        Lexicon::new(["clean", "average"], ["bathroom", "food"])
    }

    const BATHROOM: &str = "The bathroom is very clean but the food is average.";

    fn pairs(ts: &[OpinionTuple]) -> Vec<(String, String)> {
        ts.iter().map(|t| (t.modifier.clone(), t.aspect.clone())).collect()
    }

    #[test]
    fn rule_extractor_bathroom_example() {
        let out = extract_rule_based(&tokenize(BATHROOM), &lexicon());
        assert_eq!(
            pairs(&out),
            [
                ("very clean".to_string(), "bathroom".to_string()),
                ("average".to_string(), "food".to_string())
            ]
        );
        assert_eq!(out[0].modifier_span, TokenSpan::new(3, 4));
        assert_eq!(out[0].aspect_span, TokenSpan::new(1, 1));
    }

    #[test]
    fn rule_extractor_no_hits_and_runs() {
        assert!(extract_rule_based(&tokenize("nothing to see here"), &lexicon()).is_empty());
        let out = extract_rule_based(&tokenize("clean clean bathroom"), &lexicon());
        assert_eq!(pairs(&out), [("clean clean".to_string(), "bathroom".to_string())]);
        assert_eq!(out[0].modifier_span, TokenSpan::new(0, 1));
    }

    #[test]
    fn zero_epochs_gives_all_o() {
        let s = tokenize(BATHROOM);
        let tags = TagSequence::from_tuples(s.len(), &extract_rule_based(&s, &lexicon()));
        let model = train_tagger(&[(s.clone(), tags)], 0, 1, Some(&lexicon())).unwrap();
        assert!(model.features.is_empty());
        assert!(model.transitions.iter().flatten().all(|&w| w == 0.0));
        assert_eq!(tag(&model, &s), TagSequence::all_o(s.len()));
    }

    #[test]
    fn tagger_errors() {
        assert!(train_tagger(&[], 3, 0, None).is_err());
        let s = tokenize("the food");
        let bad = TagSequence { labels: vec![Label::O, Label::IAsp] };
        assert!(train_tagger(&[(s, bad)], 3, 0, None).is_err());
    }

    #[test]
    fn pairing_matches_rules_on_bathroom() {
        let s = tokenize(BATHROOM);
        let rule = extract_rule_based(&s, &lexicon());
        let tags = TagSequence::from_tuples(s.len(), &rule);
        assert_eq!(pair(&tags, &s), rule);
    }

    #[test]
    fn pairing_drops_unpaired() {
        let s = tokenize("the food");
        let tags = TagSequence { labels: vec![Label::O, Label::BAsp] };
        assert!(pair(&tags, &s).is_empty());
    }

    #[test]
    fn equidistant_modifier_attaches_to_following_aspect() {
        let s = tokenize("bathroom clean food");
        let tags = TagSequence { labels: vec![Label::BAsp, Label::BMod, Label::BAsp] };
        let out = pair(&tags, &s);
        assert_eq!(pairs(&out), [("clean".to_string(), "food".to_string())]);
    }

    #[test]
    fn orphan_inside_is_repaired() {
        let s = tokenize("clean food");
        let tags = TagSequence { labels: vec![Label::IMod, Label::IAsp] };
        let out = pair(&tags, &s);
        assert_eq!(pairs(&out), [("clean".to_string(), "food".to_string())]);
        assert_eq!(
            bio_spans(&[BioTag::B, BioTag::I, BioTag::O, BioTag::B]),
            [TokenSpan::new(0, 1), TokenSpan::new(3, 3)]
        );
    }

    #[test]
    fn label_strings_round_trip() {
        for l in Label::ALL {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
        }
        assert!("X".parse::<Label>().is_err());
    }

    fn brute_force(
        em: &[[f64; N_LABELS]],
        tr: &[[f64; N_LABELS]; N_LABELS + 1],
    ) -> f64 {
        let n = em.len();
        let mut best = f64::NEG_INFINITY;
        let total = N_LABELS.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let mut prev: Option<Label> = None;
            let mut s = 0.0;
            let mut ok = true;
            for e in em {
                let y = Label::ALL[c % N_LABELS];
                c /= N_LABELS;
                if !transition_allowed(prev, y) {
                    ok = false;
                    break;
                }
                s += tr[prev.map_or(START, Label::index)][y.index()] + e[y.index()];
                prev = Some(y);
            }
            if ok && s > best {
                best = s;
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn viterbi_matches_exhaustive(
            n in 1usize..=6,
            vals in proptest::collection::vec(-3.0f64..3.0, 6 * N_LABELS + (N_LABELS + 1) * N_LABELS),
        ) {
            let em: Vec<[f64; N_LABELS]> = (0..n)
                .map(|t| core::array::from_fn(|y| vals[t * N_LABELS + y]))
                .collect();
            let off = 6 * N_LABELS;
            let tr: [[f64; N_LABELS]; N_LABELS + 1] =
                core::array::from_fn(|r| core::array::from_fn(|c| vals[off + r * N_LABELS + c]));
            let (labels, score) = viterbi(&em, &tr);
            prop_assert!((score - brute_force(&em, &tr)).abs() < 1e-9);
            let tags = TagSequence { labels };
            prop_assert!(tags.is_well_formed());
        }

        #[test]
        fn pair_output_valid(raw in proptest::collection::vec(0usize..N_LABELS, 1..12)) {
            let words: Vec<String> = (0..raw.len()).map(|i| format!("w{i}")).collect();
            let s = tokenize(&words.join(" "));
            let tags = TagSequence { labels: raw.iter().map(|&i| Label::ALL[i]).collect() };
            let out = pair(&tags, &s);
            for w in out.windows(2) {
                prop_assert!(w[0].aspect_span.start <= w[1].aspect_span.start);
            }
            for t in &out {
                prop_assert!(t.aspect_span.end < s.len() && t.modifier_span.end < s.len());
                prop_assert!(!t.aspect_span.overlaps(&t.modifier_span));
            }
        }
    }
}
