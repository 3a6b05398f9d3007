use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::nn::{prefixed, xavier, Embedding, GruCell, GruStep, Params, Tensor2};
use crate::text::{TokenSequence, Vocab, CLS, SEP};
use crate::{Error, Result};

pub const UNK: &str = "[UNK]";
const UNK_ID: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub embedding_dim: usize,
    /// Output width per token; split evenly between the two directions.
    pub hidden_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            embedding_dim: 16,
            hidden_dim: 32,
        }
    }
}

/// Bidirectional GRU over word embeddings. Token `i` is represented by the
/// forward state after reading `0..=i` concatenated with the backward state
/// after reading `i..n` right to left.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub vocab: Vocab,
    pub embedding: Embedding,
    pub forward: GruCell,
    pub backward: GruCell,
}

/// Intermediate states kept for the backward pass.
pub struct EncoderTrace {
    pub ids: Vec<usize>,
    pub forward: Vec<GruStep>,
    /// In reading order, so `backward[k]` belongs to token `n - 1 - k`.
    pub backward: Vec<GruStep>,
    pub outputs: Vec<Vec<f64>>,
}

impl Params for EncoderModel {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = prefixed("embedding", self.embedding.tensors());
        out.extend(prefixed("forward", self.forward.tensors()));
        out.extend(prefixed("backward", self.backward.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out = self.embedding.tensors_mut();
        out.extend(self.forward.tensors_mut());
        out.extend(self.backward.tensors_mut());
        out
    }
}

/// Encoder vocabulary: UNK, CLS, SEP, then lowercased words.
pub fn encoder_vocab<I, S>(words: I) -> Vocab
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    Vocab::new(&[UNK, CLS, SEP], words.into_iter().map(|w| w.as_ref().to_lowercase()))
}

impl EncoderModel {
    pub fn new(vocab: Vocab, config: EncoderConfig, rng: &mut crate::Rng) -> Result<Self> {
        if config.embedding_dim == 0 || config.hidden_dim == 0 || config.hidden_dim % 2 != 0 {
            return Err(Error::invalid(alloc::format!(
                "encoder needs a positive embedding dim and an even hidden dim, got {} and {}",
                config.embedding_dim,
                config.hidden_dim
            )));
        }
        if vocab.id(UNK) != Some(UNK_ID) || vocab.id(CLS).is_none() || vocab.id(SEP).is_none() {
            return Err(Error::invalid("encoder vocabulary must contain UNK, CLS and SEP"));
        }
        let half = config.hidden_dim / 2;
        Ok(EncoderModel {
            embedding: Embedding::new(xavier(vocab.len(), config.embedding_dim, rng)),
            forward: GruCell::new(config.embedding_dim, half, rng),
            backward: GruCell::new(config.embedding_dim, half, rng),
            vocab,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden_dim() + self.backward.hidden_dim()
    }

    pub fn ids(&self, sequence: &TokenSequence) -> Vec<usize> {
        sequence
            .tokens
            .iter()
            .map(|t| {
                let key = if t.synthetic { t.surface.clone() } else { t.lower() };
                self.vocab.id(&key).unwrap_or(UNK_ID)
            })
            .collect()
    }

    pub fn encode(&self, sequence: &TokenSequence) -> Result<EncoderTrace> {
        self.encode_ids(self.ids(sequence))
    }

    pub fn encode_ids(&self, ids: Vec<usize>) -> Result<EncoderTrace> {
        let half = self.forward.hidden_dim();
        let h0 = vec![0.0; half];
        let forward = self.forward.run(ids.iter().map(|&i| self.embedding.lookup(i)), &h0)?;
        let backward = self
            .backward
            .run(ids.iter().rev().map(|&i| self.embedding.lookup(i)), &h0)?;
        let n = ids.len();
        let outputs = (0..n)
            .map(|i| {
                let mut v = forward[i].h.clone();
                v.extend_from_slice(&backward[n - 1 - i].h);
                v
            })
            .collect();
        Ok(EncoderTrace {
            ids,
            forward,
            backward,
            outputs,
        })
    }

    /// Backpropagates per-token output gradients (width D each) into `grad`.
    pub fn backprop(&self, trace: &EncoderTrace, d_outputs: &[Vec<f64>], grad: &mut EncoderModel) {
        let half = self.forward.hidden_dim();
        let n = trace.ids.len();
        let ed = self.embedding.dim();
        let mut dh = vec![0.0; half];
        for i in (0..n).rev() {
            for (a, b) in dh.iter_mut().zip(&d_outputs[i][..half]) {
                *a += b;
            }
            let mut dx = vec![0.0; ed];
            dh = self.forward.backward(&trace.forward[i], &dh, &mut grad.forward, &mut dx);
            self.embedding.backward(trace.ids[i], &dx, &mut grad.embedding);
        }
        let mut dh = vec![0.0; half];
        for k in (0..n).rev() {
            let i = n - 1 - k;
            for (a, b) in dh.iter_mut().zip(&d_outputs[i][half..]) {
                *a += b;
            }
            let mut dx = vec![0.0; ed];
            dh = self.backward.backward(&trace.backward[k], &dh, &mut grad.backward, &mut dx);
            self.embedding.backward(trace.ids[i], &dx, &mut grad.embedding);
        }
    }
}
