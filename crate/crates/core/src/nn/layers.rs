use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{xavier, Params, Tensor2};
use crate::{Error, Result, Rng};

/// `y = W x + b`
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Tensor2,
    pub bias: Tensor2,
}

impl Dense {
    pub fn new(input: usize, output: usize, rng: &mut Rng) -> Self {
        Dense {
            weight: xavier(output, input, rng),
            bias: Tensor2::zeros(output, 1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("dense input", self.input_dim(), x.len()));
        }
        let mut y = self.bias.data().to_vec();
        self.weight.matvec_acc(x, &mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients into `grad` and input gradients into `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        grad.weight.add_outer(dy, x);
        for (b, d) in grad.bias.data_mut().iter_mut().zip(dy) {
            *b += d;
        }
        if let Some(dx) = dx {
            self.weight.matvec_t_acc(dy, dx);
        }
    }
}

impl Params for Dense {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Lookup table, one row per vocabulary entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub table: Tensor2,
}

impl Embedding {
    pub fn new(table: Tensor2) -> Self {
        Embedding { table }
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.table.rows()
    }

    pub fn lookup(&self, id: usize) -> &[f64] {
        self.table.row(id)
    }

    pub fn backward(&self, id: usize, dy: &[f64], grad: &mut Embedding) {
        super::axpy(1.0, dy, grad.table.row_mut(id));
    }
}

impl Params for Embedding {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        vec![("table".into(), &self.table)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![&mut self.table]
    }
}
