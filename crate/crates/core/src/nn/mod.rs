//! Differentiable kernels with hand-written backward passes.
//!
//! Everything is `f64`. Models expose their parameter blocks through
//! [`Params`]; a gradient is a value of the same model type holding
//! per-parameter derivatives, so optimizers and the gradient checker can walk
//! parameters and gradients in lockstep.

mod gradcheck;
mod gru;
mod init;
mod layers;
mod loss;
mod optim;
mod tensor;

pub use gradcheck::{grad_check, BlockReport, GradReport, FD_EPSILON, MAX_COORDS_PER_BLOCK};
pub use gru::{GruCell, GruStep};
pub use init::{init, xavier, InitScheme};
pub use layers::{Dense, Embedding};
pub use loss::{log_softmax, sigmoid, softmax, softmax_xent};
pub use optim::{Optimizer, OptimizerKind};
pub use tensor::{axpy, dot, Tensor2};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub trait Params {
    /// Named parameter blocks in a fixed order.
    fn tensors(&self) -> Vec<(String, &Tensor2)>;

    /// The same blocks, same order, mutably.
    fn tensors_mut(&mut self) -> Vec<&mut Tensor2>;

    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut out = self.clone();
        out.zero();
        out
    }

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }
}

/// Prefixes child block names with `prefix.`.
pub fn prefixed<'a>(prefix: &str, blocks: Vec<(String, &'a Tensor2)>) -> Vec<(String, &'a Tensor2)> {
    blocks
        .into_iter()
        .map(|(n, t)| (format!("{prefix}.{n}"), t))
        .collect()
}
