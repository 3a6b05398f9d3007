use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Params;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First-order optimizer. Moment buffers are created on the first step and
/// indexed by parameter block order.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Rescale the whole gradient when its L2 norm exceeds this.
    pub clip_norm: Option<f64>,
    steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::invalid(alloc::format!("learning rate {learning_rate}")));
        }
        Ok(Optimizer {
            kind,
            learning_rate,
            clip_norm: None,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::adam(), learning_rate)
    }

    pub fn with_clip_norm(mut self, clip: f64) -> Self {
        self.clip_norm = Some(clip);
        self
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step<P: Params>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.tensors();
        if !grads.iter().all(|(_, g)| g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let mut blocks = params.tensors_mut();
        if blocks.len() != grads.len() {
            return Err(Error::shape("optimizer blocks", blocks.len(), grads.len()));
        }
        self.steps += 1;
        if self.learning_rate == 0.0 {
            return Ok(());
        }
        let scale = match self.clip_norm {
            Some(c) => {
                let norm = libm::sqrt(
                    grads
                        .iter()
                        .flat_map(|(_, g)| g.data())
                        .map(|x| x * x)
                        .sum::<f64>(),
                );
                if norm > c {
                    c / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, (_, g)) in blocks.iter_mut().zip(&grads) {
                    for (pi, gi) in p.data_mut().iter_mut().zip(g.data()) {
                        *pi -= lr * scale * gi;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.first.is_empty() {
                    self.first = grads.iter().map(|(_, g)| vec![0.0; g.len()]).collect();
                    self.second = self.first.clone();
                }
                let t = self.steps as f64;
                let c1 = 1.0 - libm::pow(beta1, t);
                let c2 = 1.0 - libm::pow(beta2, t);
                for (k, (p, (_, g))) in blocks.iter_mut().zip(&grads).enumerate() {
                    let m = &mut self.first[k];
                    let v = &mut self.second[k];
                    for (i, (pi, gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        let gi = gi * scale;
                        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                        *pi -= lr * (m[i] / c1) / (libm::sqrt(v[i] / c2) + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
