use opkb_core::extract::{transition_allowed, viterbi, Label, N_LABELS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best score over every constrained label sequence, by depth-first search.
fn brute(em: &[[f64; N_LABELS]], tr: &[[f64; N_LABELS]; N_LABELS + 1]) -> f64 {
    fn go(i: usize, prev: Option<Label>, acc: f64, em: &[[f64; N_LABELS]], tr: &[[f64; N_LABELS]; N_LABELS + 1], best: &mut f64) {
        if i == em.len() {
            *best = best.max(acc);
            return;
        }
        for next in Label::ALL {
            if transition_allowed(prev, next) {
                let row = prev.map_or(N_LABELS, Label::index);
                go(i + 1, Some(next), acc + tr[row][next.index()] + em[i][next.index()], em, tr, best);
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    go(0, None, 0.0, em, tr, &mut best);
    best
}

#[test]
fn viterbi_equals_exhaustive_up_to_twelve_tokens() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in (1..=12).chain([12, 12]) {
        let em: Vec<[f64; N_LABELS]> = (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-2.0..2.0))).collect();
        let tr: [[f64; N_LABELS]; N_LABELS + 1] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        let (labels, score) = viterbi(&em, &tr);
        assert_eq!(labels.len(), n);
        let best = brute(&em, &tr);
        assert!((score - best).abs() < 1e-9, "n={n}: {score} vs {best}");
    }
}
