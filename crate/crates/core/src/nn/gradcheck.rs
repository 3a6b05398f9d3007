use alloc::string::String;
use alloc::vec::Vec;

use super::Params;
use crate::{Error, Result};

pub const FD_EPSILON: f64 = 1e-4;
pub const MAX_COORDS_PER_BLOCK: usize = 32;
const ABS_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub blocks: Vec<BlockReport>,
    pub tolerance: f64,
}

impl GradReport {
    pub fn max_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() < self.tolerance
    }
}

fn coordinates(len: usize) -> impl Iterator<Item = usize> {
    let n = len.min(MAX_COORDS_PER_BLOCK);
    (0..n).map(move |i| i * len / n)
}

/// Compares the analytic gradient returned by `f` against central
/// differences, on at most [`MAX_COORDS_PER_BLOCK`] evenly spaced
/// coordinates of every parameter block. The relative error of a coordinate
/// is `|a − n| / max(|a|, |n|, 1e-5)`.
pub fn grad_check<M, F>(model: &M, f: F, tolerance: f64) -> Result<GradReport>
where
    M: Params + Clone,
    F: Fn(&M) -> Result<(f64, M)>,
{
    let (loss, analytic) = f(model)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    let analytic: Vec<(String, Vec<f64>)> = analytic
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.data().to_vec()))
        .collect();
    let mut work = model.clone();
    let mut blocks = Vec::with_capacity(analytic.len());
    for (b, (name, grad)) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        let mut checked = 0;
        for i in coordinates(grad.len()) {
            let orig = work.tensors_mut()[b].data()[i];
            work.tensors_mut()[b].data_mut()[i] = orig + FD_EPSILON;
            let up = f(&work)?.0;
            work.tensors_mut()[b].data_mut()[i] = orig - FD_EPSILON;
            let down = f(&work)?.0;
            work.tensors_mut()[b].data_mut()[i] = orig;
            if !(up.is_finite() && down.is_finite()) {
                return Err(Error::NonFinite("loss"));
            }
            let numeric = (up - down) / (2.0 * FD_EPSILON);
            let a = grad[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(ABS_FLOOR);
            worst = worst.max(rel);
            checked += 1;
        }
        blocks.push(BlockReport {
            name: name.clone(),
            max_rel_error: worst,
            checked,
        });
    }
    Ok(GradReport { blocks, tolerance })
}
