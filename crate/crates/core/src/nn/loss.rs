use alloc::vec::Vec;

use crate::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|&l| libm::exp(l - max)).sum::<f64>());
    logits.iter().map(|&l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(libm::exp).collect()
}

/// `-log softmax(logits)[target]` and its gradient `softmax - onehot`.
pub fn softmax_xent(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if logits.is_empty() {
        return Err(Error::Empty("logits"));
    }
    if target >= logits.len() {
        return Err(Error::invalid(alloc::format!(
            "target {target} out of range for {} classes",
            logits.len()
        )));
    }
    let logp = log_softmax(logits);
    let loss = -logp[target];
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss"));
    }
    let mut grad: Vec<f64> = logp.into_iter().map(libm::exp).collect();
    grad[target] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        for k in 1..6 {
            let (loss, _) = softmax_xent(&vec![0.3; k], 0).unwrap();
            assert!((loss - libm::log(k as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn large_logits_stable() {
        let (loss, grad) = softmax_xent(&[1000.0, 0.0], 0).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(grad.iter().all(|g| g.is_finite()));
        let (loss, _) = softmax_xent(&[1000.0, 0.0], 1).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn target_out_of_range() {
        assert!(softmax_xent(&[0.0, 1.0], 2).is_err());
        assert!(softmax_xent(&[], 0).is_err());
    }

    #[test]
    fn sigmoid_symmetry() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(logits in proptest::collection::vec(-50.0f64..50.0, 1..10)) {
            let p = softmax(&logits);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn xent_gradient_matches_finite_differences(
            logits in proptest::collection::vec(-4.0f64..4.0, 2..8),
            t in 0usize..8,
        ) {
            let target = t % logits.len();
            let (_, grad) = softmax_xent(&logits, target).unwrap();
            let eps = 1e-4;
            for i in 0..logits.len() {
                let mut up = logits.clone();
                up[i] += eps;
                let mut dn = logits.clone();
                dn[i] -= eps;
                let num = (softmax_xent(&up, target).unwrap().0 - softmax_xent(&dn, target).unwrap().0) / (2.0 * eps);
                let rel = (num - grad[i]).abs() / num.abs().max(grad[i].abs()).max(1e-5);
                prop_assert!(rel < 1e-3, "coord {} analytic {} numeric {}", i, grad[i], num);
            }
        }
    }
}
