use alloc::string::String;

use rand::Rng as _;

use super::Tensor2;
use crate::text::WordVectors;
use crate::{Error, Result, Rng};

pub enum InitScheme<'a> {
    /// Uniform in `±sqrt(6 / (rows + cols))`.
    UniformXavier,
    /// One row per vocabulary word copied from the table; unknown words are zero.
    FromWordVectors {
        vectors: &'a WordVectors,
        vocab: &'a [String],
    },
}

pub fn xavier(rows: usize, cols: usize, rng: &mut Rng) -> Tensor2 {
    let bound = libm::sqrt(6.0 / (rows + cols) as f64);
    let mut t = Tensor2::zeros(rows, cols);
    for x in t.data_mut() {
        *x = rng.gen_range(-bound..bound);
    }
    t
}

pub fn init(rows: usize, cols: usize, scheme: InitScheme<'_>, seed: u64) -> Result<Tensor2> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("tensor dimensions must be positive"));
    }
    match scheme {
        InitScheme::UniformXavier => Ok(xavier(rows, cols, &mut crate::rng(seed))),
        InitScheme::FromWordVectors { vectors, vocab } => {
            if vectors.dim() != cols {
                return Err(Error::shape("word vector width", cols, vectors.dim()));
            }
            if vocab.len() != rows {
                return Err(Error::shape("vocabulary size", rows, vocab.len()));
            }
            let mut t = Tensor2::zeros(rows, cols);
            for (r, word) in vocab.iter().enumerate() {
                if let Some(v) = vectors.get(word) {
                    t.row_mut(r).copy_from_slice(v);
                }
            }
            Ok(t)
        }
    }
}
