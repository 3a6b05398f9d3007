//! Tokenization, review and dataset types, word vectors, edge lists and splits.
//!
//! Offsets are character (Unicode scalar) offsets into the owning text and
//! are half-open. Token ranges over a sequence ([`TokenSpan`]) are inclusive.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
    /// CLS/SEP markers. They have an empty span and are ignored by span metrics.
    #[serde(default)]
    pub synthetic: bool,
}

impl Token {
    pub fn synthetic(marker: &str) -> Self {
        Token {
            surface: marker.to_string(),
            char_start: 0,
            char_end: 0,
            synthetic: true,
        }
    }

    pub fn is_punct(&self) -> bool {
        !self.surface.is_empty() && self.surface.chars().all(|c| c.is_ascii_punctuation())
    }

    pub fn lower(&self) -> String {
        self.surface.to_lowercase()
    }
}

/// Inclusive token range `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        TokenSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &TokenSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.start <= idx && idx <= self.end
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<Token>) -> Self {
        TokenSequence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    /// Lowercased surfaces of `span`, joined with single spaces.
    pub fn phrase(&self, span: TokenSpan) -> String {
        let words: Vec<String> = self.tokens[span.start..=span.end]
            .iter()
            .map(Token::lower)
            .collect();
        words.join(" ")
    }

    /// Copy of the tokens covered by `span`.
    pub fn slice(&self, span: TokenSpan) -> TokenSequence {
        TokenSequence::new(self.tokens[span.start..=span.end].to_vec())
    }
}

impl core::ops::Index<usize> for TokenSequence {
    type Output = Token;

    fn index(&self, idx: usize) -> &Token {
        &self.tokens[idx]
    }
}

/// Whitespace split with leading and trailing ASCII punctuation detached,
/// one token per punctuation character. Case is preserved.
pub fn tokenize(text: &str) -> TokenSequence {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        push_chunk(&chars, start, i, &mut tokens);
    }
    TokenSequence::new(tokens)
}

fn push_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let mut lo = start;
    let mut hi = end;
    while lo < hi && chars[lo].is_ascii_punctuation() {
        lo += 1;
    }
    while hi > lo && chars[hi - 1].is_ascii_punctuation() {
        hi -= 1;
    }
    let mut push = |a: usize, b: usize| {
        out.push(Token {
            surface: chars[a..b].iter().collect(),
            char_start: a,
            char_end: b,
            synthetic: false,
        })
    };
    for p in start..lo {
        push(p, p + 1);
    }
    if lo < hi {
        push(lo, hi);
    }
    for p in hi.max(lo)..end {
        push(p, p + 1);
    }
}

/// Tokenizes `text` and splits it into sentences. A sentence ends on a
/// `.`, `!` or `?` token that is followed by whitespace or the end of text.
pub fn sentences(text: &str) -> Vec<TokenSequence> {
    let chars: Vec<char> = text.chars().collect();
    let all = tokenize(text);
    let mut out = Vec::new();
    let mut current = Vec::new();
    for tok in all.tokens {
        let ends = matches!(tok.surface.as_str(), "." | "!" | "?")
            && chars.get(tok.char_end).map_or(true, |c| c.is_whitespace());
        current.push(tok);
        if ends {
            out.push(TokenSequence::new(core::mem::take(&mut current)));
        }
    }
    if !current.is_empty() {
        out.push(TokenSequence::new(current));
    }
    out
}

/// Characters `start..end` of `text`.
pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Lowercase and collapse internal whitespace to single spaces.
pub fn normalize_phrase(phrase: &str) -> String {
    let lower = phrase.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    words.join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    pub entity_id: String,
    pub text: String,
    pub sentences: Vec<TokenSequence>,
}

impl Review {
    pub fn new(id: impl Into<String>, entity_id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let entity_id = entity_id.into();
        if entity_id.is_empty() {
            return Err(Error::invalid("review entity id must be nonempty"));
        }
        let text = text.into();
        let sentences = sentences(&text);
        Ok(Review {
            id: id.into(),
            entity_id,
            text,
            sentences,
        })
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(TokenSequence::len).sum()
    }

    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaExample {
    pub id: String,
    pub review: Review,
    pub question_text: String,
    pub question: TokenSequence,
    pub answer_char_start: usize,
    pub answer_char_end: usize,
}

impl QaExample {
    pub fn new(
        id: impl Into<String>,
        review: Review,
        question: impl Into<String>,
        answer_char_start: usize,
        answer_char_end: usize,
    ) -> Result<Self> {
        let question_text = question.into();
        if answer_char_start >= answer_char_end || answer_char_end > char_len(&review.text) {
            return Err(Error::invalid(alloc::format!(
                "answer span {answer_char_start}..{answer_char_end} outside review `{}`",
                review.id
            )));
        }
        Ok(QaExample {
            id: id.into(),
            question: tokenize(&question_text),
            question_text,
            review,
            answer_char_start,
            answer_char_end,
        })
    }

    pub fn answer_text(&self) -> String {
        char_slice(&self.review.text, self.answer_char_start, self.answer_char_end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl Polarity {
    /// Fixed class order; also the tie-break order.
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Polarity> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }
}

impl core::str::FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            "neutral" => Ok(Polarity::Neutral),
            other => Err(Error::Unknown {
                kind: "polarity",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsaExample {
    pub id: String,
    pub sentence: TokenSequence,
    pub aspect_spans: Vec<TokenSpan>,
    pub target_aspect: Option<TokenSpan>,
    pub polarity: Option<Polarity>,
}

impl AbsaExample {
    pub fn new(
        id: impl Into<String>,
        text: &str,
        aspect_spans: Vec<TokenSpan>,
        target_aspect: Option<TokenSpan>,
        polarity: Option<Polarity>,
    ) -> Result<Self> {
        let sentence = tokenize(text);
        let n = sentence.len();
        for span in aspect_spans.iter().chain(target_aspect.iter()) {
            if span.start > span.end || span.end >= n {
                return Err(Error::invalid(alloc::format!(
                    "aspect span {}..={} outside sentence of {n} tokens",
                    span.start,
                    span.end
                )));
            }
        }
        if target_aspect.is_some() != polarity.is_some() {
            return Err(Error::invalid("polarity must be given iff a target aspect is"));
        }
        Ok(AbsaExample {
            id: id.into(),
            sentence,
            aspect_spans,
            target_aspect,
            polarity,
        })
    }
}

/// Pretrained word vectors. Unknown words map to the zero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordVectors {
    dim: usize,
    table: BTreeMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("word vector dimension must be positive"));
        }
        Ok(WordVectors {
            dim,
            table: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::shape("word vector", self.dim, vector.len()));
        }
        self.table.insert(word.into(), vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.table.get(word).map(Vec::as_slice)
    }

    pub fn lookup(&self, word: &str) -> Vec<f64> {
        self.get(word).map_or_else(|| vec![0.0; self.dim], <[f64]>::to_vec)
    }
}

/// Undirected phrase graph, e.g. the English part of a general commonsense KB.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeList {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeSet<(String, String)>,
}

impl EdgeList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, phrase: &str) -> String {
        let p = normalize_phrase(phrase);
        self.nodes.insert(p.clone());
        p
    }

    pub fn add_edge(&mut self, a: &str, b: &str) {
        let a = self.add_node(a);
        let b = self.add_node(b);
        self.edges.insert(ordered(a, b));
    }

    pub fn has_node(&self, phrase: &str) -> bool {
        self.nodes.contains(&normalize_phrase(phrase))
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges
            .contains(&ordered(normalize_phrase(a), normalize_phrase(b)))
    }
}

fn ordered(a: String, b: String) -> (String, String) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Word ↔ id table. Special symbols take the first ids, in the order given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Specials first, then the remaining distinct words in sorted order.
    pub fn new<I, S>(specials: &[&str], words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let rest: BTreeSet<String> = words
            .into_iter()
            .map(Into::into)
            .filter(|w| !specials.contains(&w.as_str()))
            .collect();
        let all: Vec<String> = specials.iter().map(|s| s.to_string()).chain(rest).collect();
        Self::from_words(all)
    }

    /// Keeps the given order; later duplicates are ignored.
    pub fn from_words(words: Vec<String>) -> Self {
        let mut index = BTreeMap::new();
        let mut kept = Vec::with_capacity(words.len());
        for w in words {
            if !index.contains_key(&w) {
                index.insert(w.clone(), kept.len());
                kept.push(w);
            }
        }
        Vocab { words: kept, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

impl From<Vec<String>> for Vocab {
    fn from(words: Vec<String>) -> Self {
        Vocab::from_words(words)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

/// Deterministic seeded shuffle, then the first `floor(fraction * n)`
/// elements become the training partition.
pub fn split<T: Clone>(examples: &[T], train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(alloc::format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    if examples.is_empty() {
        return Err(Error::Empty("split input"));
    }
    let n_train = libm::floor(train_fraction * examples.len() as f64 + 1e-9) as usize;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut crate::rng(seed));
    let train = order[..n_train].iter().map(|&i| examples[i].clone()).collect();
    let validation = order[n_train..].iter().map(|&i| examples[i].clone()).collect();
    Ok((train, validation))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub avg_review_words: f64,
    pub avg_question_words: f64,
    pub avg_answer_words: f64,
}

pub fn dataset_stats(examples: &[QaExample]) -> Result<DatasetStats> {
    if examples.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let n = examples.len() as f64;
    let mean = |f: &dyn Fn(&QaExample) -> usize| examples.iter().map(f).sum::<usize>() as f64 / n;
    Ok(DatasetStats {
        avg_review_words: mean(&|e| e.review.word_count()),
        avg_question_words: mean(&|e| e.question_text.split_whitespace().count()),
        avg_answer_words: mean(&|e| e.answer_text().split_whitespace().count()),
    })
}
