//! Review comprehension: a bidirectional GRU text encoder whose token
//! vectors are extended with a commonsense vector per sentence, feeding
//! aspect extraction, aspect sentiment and extractive QA heads.

mod encoder;
mod heads;
mod train;


pub use encoder::{encoder_vocab, EncoderConfig, EncoderModel, EncoderTrace, UNK};
pub use heads::{ae_decode, asc_predict, best_span, ComprehensionModel, Logits, TaskHead, AE_TAGS};
pub use train::{
    evaluate, predict, prepare, train_task, Dataset, Gold, Prediction, Prepared, TaskScore, TrainConfig, Trained,
    DEFAULT_MAX_ANSWER_TOKENS,
};

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::distmult::{phrase_vector, DistMultModel};
use crate::extract::OpinionTuple;
use crate::reasoner::{embed_premise, Seq2SeqModel};
use crate::text::{Token, TokenSequence, CLS, SEP};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Ae,
    Asc,
    Qa,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Ae => "ae",
            Task::Asc => "asc",
            Task::Qa => "qa",
        }
    }
}

impl core::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ae" => Ok(Task::Ae),
            "asc" => Ok(Task::Asc),
            "qa" => Ok(Task::Qa),
            _ => Err(Error::Unknown {
                kind: "task",
                name: s.into(),
            }),
        }
    }
}

/// Which commonsense vector a token of the model input carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Token of review sentence `s`.
    Sentence(usize),
    /// The CLS token: first extraction of the whole input.
    WholeInput,
    /// Question, aspect and SEP tokens: zeros.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub sequence: TokenSequence,
    pub slots: Vec<Slot>,
    /// Token positions `review_start..review_end` hold the review.
    pub review_start: usize,
    pub review_end: usize,
}

pub struct InputParts<'a> {
    pub review: &'a [TokenSequence],
    pub question: Option<&'a TokenSequence>,
    pub aspect: Option<&'a TokenSequence>,
}

/// AE: `[CLS] review`; ASC: `[CLS] review [SEP] aspect`;
/// QA: `[CLS] question [SEP] review`.
pub fn build_input(task: Task, parts: &InputParts<'_>) -> Result<ModelInput> {
    if parts.review.iter().all(TokenSequence::is_empty) {
        return Err(Error::Empty("review tokens"));
    }
    let mut tokens = vec![Token::synthetic(CLS)];
    let mut slots = vec![Slot::WholeInput];
    let push_plain = |seq: &TokenSequence, tokens: &mut Vec<Token>, slots: &mut Vec<Slot>| {
        tokens.extend(seq.tokens.iter().cloned());
        slots.extend(core::iter::repeat(Slot::None).take(seq.len()));
    };
    let push_review = |tokens: &mut Vec<Token>, slots: &mut Vec<Slot>| {
        let start = tokens.len();
        for (s, sent) in parts.review.iter().enumerate() {
            tokens.extend(sent.tokens.iter().cloned());
            slots.extend(core::iter::repeat(Slot::Sentence(s)).take(sent.len()));
        }
        (start, tokens.len())
    };
    let (review_start, review_end) = match task {
        Task::Ae => push_review(&mut tokens, &mut slots),
        Task::Asc => {
            let aspect = parts.aspect.ok_or(Error::Empty("aspect for sentiment input"))?;
            let range = push_review(&mut tokens, &mut slots);
            tokens.push(Token::synthetic(SEP));
            slots.push(Slot::None);
            push_plain(aspect, &mut tokens, &mut slots);
            range
        }
        Task::Qa => {
            let question = parts.question.ok_or(Error::Empty("question for QA input"))?;
            push_plain(question, &mut tokens, &mut slots);
            tokens.push(Token::synthetic(SEP));
            slots.push(Slot::None);
            push_review(&mut tokens, &mut slots)
        }
    };
    Ok(ModelInput {
        sequence: TokenSequence::new(tokens),
        slots,
        review_start,
        review_end,
    })
}

/// Where commonsense vectors come from.
#[derive(Debug, Clone, Copy)]
pub enum CommonsenseSource<'a> {
    Reasoner(&'a Seq2SeqModel),
    DistMult(&'a DistMultModel),
    /// All-zero vectors of the given width.
    Zero(usize),
}

impl CommonsenseSource<'_> {
    pub fn width(&self) -> usize {
        match self {
            CommonsenseSource::Reasoner(m) => m.hidden_dim(),
            CommonsenseSource::DistMult(m) => m.dim(),
            CommonsenseSource::Zero(w) => *w,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CommonsenseSource::Reasoner(_) => "reasoner",
            CommonsenseSource::DistMult(_) => "distmult",
            CommonsenseSource::Zero(_) => "zero",
        }
    }

    /// Vector for an opinion phrase `"modifier aspect"`.
    pub fn vector(&self, phrase: &str) -> Vec<f64> {
        match self {
            CommonsenseSource::Reasoner(m) => embed_premise(m, phrase).vector,
            CommonsenseSource::DistMult(m) => phrase_vector(m, phrase),
            CommonsenseSource::Zero(w) => vec![0.0; *w],
        }
    }
}

/// The extraction with the smallest aspect start; list order breaks ties.
pub fn first_extraction(tuples: &[OpinionTuple]) -> Option<&OpinionTuple> {
    tuples.iter().fold(None, |best: Option<&OpinionTuple>, t| match best {
        Some(b) if b.aspect_span.start <= t.aspect_span.start => Some(b),
        _ => Some(t),
    })
}

/// The appended part of every token: the source vector of its sentence's
/// first extraction, or zeros.
pub fn appended_vectors(slots: &[Slot], extractions: &[Vec<OpinionTuple>], source: &CommonsenseSource<'_>) -> Vec<Vec<f64>> {
    let width = source.width();
    let per_sentence: Vec<Option<Vec<f64>>> = extractions
        .iter()
        .map(|ts| first_extraction(ts).map(|t| source.vector(&t.key())))
        .collect();
    let whole = per_sentence.iter().flatten().next().cloned();
    slots
        .iter()
        .map(|slot| {
            let v = match slot {
                Slot::Sentence(s) => per_sentence.get(*s).and_then(Option::as_ref),
                Slot::WholeInput => whole.as_ref(),
                Slot::None => None,
            };
            v.cloned().unwrap_or_else(|| vec![0.0; width])
        })
        .collect()
}

/// Concatenates each encoder vector with its token's commonsense vector.
pub fn augment(
    encoder_out: &[Vec<f64>],
    slots: &[Slot],
    extractions: &[Vec<OpinionTuple>],
    source: &CommonsenseSource<'_>,
) -> Result<Vec<Vec<f64>>> {
    if encoder_out.len() != slots.len() {
        return Err(Error::shape("token slots", encoder_out.len(), slots.len()));
    }
    Ok(concat(encoder_out, &appended_vectors(slots, extractions, source)))
}

pub(crate) fn concat(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let mut v = x.clone();
            v.extend_from_slice(y);
            v
        })
        .collect()
}
