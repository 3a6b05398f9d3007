use std::collections::{BTreeMap, BTreeSet};

use opkb_core::extract::{Extractor, Opinion};
use opkb_core::kb::{build_matrix, extraction_overlap, mine_facts, npmi, relation_overlap, select, KnowledgeBase};
use opkb_core::synth::{hand_corpus, thin_walls_edges};

fn extracted() -> (opkb_core::kb::ExtractionMatrix, opkb_core::kb::ModifierAspectTensor) {
    let (reviews, lexicon) = hand_corpus();
    let ex = Extractor::Rules(lexicon);
    let tuples: Vec<_> = reviews.iter().map(|r| ex.extract_review(r).concat()).collect();
    build_matrix(&reviews, &tuples).unwrap()
}

#[test]
fn hand_counts() {
    let (matrix, tensor) = extracted();
    let expected = [
        ("h1", "clean", "bathroom", 3),
        ("h1", "thin", "walls", 1),
        ("h1", "noisy", "room", 1),
        ("h1", "friendly", "staff", 1),
        ("h2", "thin", "walls", 1),
        ("h2", "noisy", "room", 2),
        ("h2", "rude", "staff", 1),
        ("h2", "cold", "breakfast", 1),
        ("h3", "great", "pool", 2),
        ("h3", "friendly", "staff", 1),
        ("h3", "cold", "breakfast", 1),
    ];
    assert_eq!(matrix.nnz(), expected.len());
    for (e, m, a, n) in expected {
        assert_eq!(matrix.get(e, &Opinion::new(m, a)), n, "{e} {m} {a}");
        assert_eq!(tensor.get(e, m, a), n);
    }
    assert_eq!(matrix.total(), 15);
    assert_eq!(tensor.marginalize(), matrix);
}

#[test]
fn npmi_matches_presence_recount() {
    let (matrix, _) = extracted();
    let mut presence: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (e, o, _) in matrix.iter() {
        presence.entry(o.key()).or_default().insert(e.to_string());
    }
    let n = 3.0_f64;
    let keys: Vec<&String> = presence.keys().collect();
    for a in &keys {
        for b in &keys {
            let (sa, sb) = (&presence[*a], &presence[*b]);
            let both = sa.intersection(sb).count();
            let expected = if both == 0 {
                -1.0
            } else if both == 3 {
                1.0
            } else {
                let pab = both as f64 / n;
                ((pab / ((sa.len() as f64 / n) * (sb.len() as f64 / n))).ln() / -pab.ln()).clamp(-1.0, 1.0)
            };
            let got = npmi(sa.len(), sb.len(), both, 3);
            assert!((got - expected).abs() < 1e-9, "{a} {b}: {got} vs {expected}");
        }
    }
}

#[test]
fn thin_walls_overlap() {
    let (matrix, _) = extracted();
    let sel = select(&matrix, 2000, 5000).unwrap();
    let facts = mine_facts(&sel.matrix, 0.5, 2).unwrap();
    assert_eq!(facts.len(), 1);
    assert_eq!(facts[0].premise, Opinion::new("thin", "walls"));
    assert_eq!(facts[0].conclusion, Opinion::new("noisy", "room"));
    assert!((facts[0].weight - 1.0).abs() < 1e-12);
    let kb = KnowledgeBase::from_facts("hotel", facts).unwrap();
    let edges = thin_walls_edges();
    assert_eq!(extraction_overlap(&kb, &edges).unwrap(), 50.0);
    assert_eq!(relation_overlap(&kb, &edges).unwrap(), 0.0);
}
