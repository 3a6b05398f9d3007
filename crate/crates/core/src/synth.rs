//! Deterministic fixtures: small corpora, knowledge bases and task suites
//! with known answers.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::distmult::Triple;
use crate::extract::{Lexicon, Opinion};
use crate::kb::{Fact, KnowledgeBase};
use crate::text::{char_len, EdgeList, QaExample, Review};
use crate::Result;

/// Triple fixture generated from fixed rules over `e00..e19`.
pub struct RuleKb {
    pub train: Vec<Triple>,
    pub test: Vec<Triple>,
    pub all: Vec<Triple>,
}

pub fn entity_name(i: usize) -> String {
    format!("e{i:02}")
}

/// Three symmetric, reflexive relations over 20 entities: same block of four
/// (`i / 4`), same residue mod 4, same parity. Every test triple is implied
/// by the training triples through its relation's equivalence classes.
pub fn rule_kb(seed: u64) -> RuleKb {
    let rules: [(&str, fn(usize) -> usize); 3] = [("same_block", |i| i / 4), ("same_residue", |i| i % 4), ("same_parity", |i| i % 2)];
    let mut all = Vec::new();
    for (rel, class) in rules {
        for h in 0..20 {
            for t in 0..20 {
                if class(h) == class(t) {
                    all.push(Triple::new(entity_name(h), rel, entity_name(t)));
                }
            }
        }
    }
    let mut shuffled = all.clone();
    shuffled.shuffle(&mut crate::rng(seed));
    // reflexive triples always train so every entity is seen
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let n_test = all.len() / 10;
    for t in shuffled {
        if t.head != t.tail && test.len() < n_test {
            test.push(t);
        } else {
            train.push(t);
        }
    }
    train.sort();
    test.sort();
    RuleKb { train, test, all }
}

const ONSETS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Distinct pronounceable nonsense word for each `n < 68600`.
pub fn pseudo_word(n: usize) -> String {
    let (o, v) = (ONSETS.len(), VOWELS.len());
    let mut k = n;
    let mut w = String::new();
    for _ in 0..2 {
        w.push(ONSETS[k % o] as char);
        k /= o;
        w.push(VOWELS[k % v] as char);
        k /= v;
    }
    w.push(ONSETS[k % o] as char);
    w
}

pub const CONCLUSIONS: [(&str, &str); 5] = [
    ("noisy", "room"),
    ("clean", "room"),
    ("tasty", "food"),
    ("rude", "staff"),
    ("slow", "wifi"),
];

/// Premises sharing one conclusion.
#[derive(Debug, Clone, PartialEq)]
pub struct ConclusionGroup {
    pub conclusion: Opinion,
    pub premises: Vec<Opinion>,
}

/// `n_groups` conclusions, each implied by `per_group` nonsense premises
/// whose words are unique to that premise. The first premise of the first
/// group is "thin walls" (→ "noisy room").
pub fn grouped_facts(n_groups: usize, per_group: usize) -> Vec<ConclusionGroup> {
    let mut next = 0;
    let mut word = move || {
        let w = pseudo_word(next * 7919 % 68600);
        next += 1;
        w
    };
    (0..n_groups)
        .map(|g| {
            let (m, a) = CONCLUSIONS[g % CONCLUSIONS.len()];
            let premises = (0..per_group)
                .map(|i| {
                    if g == 0 && i == 0 {
                        Opinion::new("thin", "walls")
                    } else {
                        let (m, a) = (word(), word());
                        Opinion::new(&m, &a)
                    }
                })
                .collect();
            ConclusionGroup {
                conclusion: Opinion::new(m, a),
                premises,
            }
        })
        .collect()
}

pub fn groups_kb(name: &str, groups: &[ConclusionGroup]) -> Result<KnowledgeBase> {
    let facts = groups
        .iter()
        .flat_map(|g| {
            g.premises.iter().map(|p| Fact {
                premise: p.clone(),
                conclusion: g.conclusion.clone(),
                weight: 1.0,
            })
        })
        .collect();
    KnowledgeBase::from_facts(name, facts)
}

/// 50 facts: five conclusions with ten premises each.
pub fn memorization_kb() -> KnowledgeBase {
    groups_kb("memorization", &grouped_facts(5, 10)).expect("fixture facts are valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaSuiteConfig {
    pub groups: usize,
    pub premises_per_group: usize,
    /// Premises per group reserved for validation reviews.
    pub held_out_per_group: usize,
    pub train_examples: usize,
    pub validation_examples: usize,
    pub test_examples: usize,
    pub seed: u64,
}

impl Default for QaSuiteConfig {
    fn default() -> Self {
        QaSuiteConfig {
            groups: 4,
            premises_per_group: 12,
            held_out_per_group: 4,
            train_examples: 160,
            validation_examples: 80,
            test_examples: 80,
            seed: 11,
        }
    }
}

/// Two-candidate QA task. Each review has two sentences of the same shape,
/// "we noticed M A .", one holding a premise of the target conclusion
/// ("noisy room") and one a premise of another conclusion. The question
/// asks why the room is noisy; the answer is the sentence with the target
/// premise. Its position alternates. Validation and test reviews use
/// premises never seen in training reviews, so only the commonsense vector
/// separates the two candidates there. The knowledge base covers all
/// premises.
#[derive(Debug, Clone)]
pub struct QaSuite {
    pub groups: Vec<ConclusionGroup>,
    pub kb: KnowledgeBase,
    pub lexicon: Lexicon,
    pub train: Vec<QaExample>,
    pub validation: Vec<QaExample>,
    pub test: Vec<QaExample>,
}

pub const SUITE_QUESTION: &str = "why is the room noisy ?";

pub fn qa_suite(config: &QaSuiteConfig) -> Result<QaSuite> {
    let groups = grouped_facts(config.groups, config.premises_per_group);
    let kb = groups_kb("disambiguation", &groups)?;
    let lexicon = Lexicon::new(
        groups.iter().flat_map(|g| g.premises.iter().map(|p| p.modifier.clone())),
        groups.iter().flat_map(|g| g.premises.iter().map(|p| p.aspect.clone())),
    );
    let split = config.premises_per_group - config.held_out_per_group;
    let mut rng = crate::rng(config.seed);
    let mut make = |n: usize, held_out: bool, prefix: &str| -> Result<Vec<QaExample>> {
        let pool = |g: &ConclusionGroup| -> Vec<Opinion> {
            if held_out {
                g.premises[split..].to_vec()
            } else {
                g.premises[..split].to_vec()
            }
        };
        let target = pool(&groups[0]);
        let others: Vec<Opinion> = groups[1..].iter().flat_map(pool).collect();
        (0..n)
            .map(|k| {
                let t = target.choose(&mut rng).expect("target pool nonempty");
                let o = others.choose(&mut rng).expect("distractor pool nonempty");
                let first = format!("we noticed {} .", t.key());
                let second = format!("we noticed {} .", o.key());
                let target_first = k % 2 == 0;
                let text = if target_first {
                    format!("{first} {second}")
                } else {
                    format!("{second} {first}")
                };
                let (start, end) = if target_first {
                    (0, char_len(&first))
                } else {
                    let s = char_len(&second) + 1;
                    (s, s + char_len(&first))
                };
                let review = Review::new(format!("{prefix}{k}"), "suite", text)?;
                QaExample::new(format!("{prefix}{k}"), review, SUITE_QUESTION, start, end)
            })
            .collect()
    };
    let train = make(config.train_examples, false, "t")?;
    let validation = make(config.validation_examples, true, "v")?;
    let test = make(config.test_examples, true, "x")?;
    Ok(QaSuite {
        groups,
        kb,
        lexicon,
        train,
        validation,
        test,
    })
}

/// Hand-countable hotel corpus: three entities, eight reviews.
pub fn hand_corpus() -> (Vec<Review>, Lexicon) {
    let rows = [
        ("r1", "h1", "The bathroom was clean. Thin walls and a noisy room."),
        ("r2", "h1", "Clean bathroom. Clean bathroom again."),
        ("r3", "h1", "Friendly staff."),
        ("r4", "h2", "Thin walls everywhere. The room was noisy."),
        ("r5", "h2", "Rude staff and cold breakfast. Noisy room."),
        ("r6", "h3", "Great pool. Friendly staff."),
        ("r7", "h3", "The pool was great."),
        ("r8", "h3", "Cold breakfast."),
    ];
    let reviews = rows
        .iter()
        .map(|(id, e, t)| Review::new(*id, *e, *t).expect("fixture reviews are valid"))
        .collect();
    let lexicon = Lexicon::new(
        ["clean", "thin", "noisy", "friendly", "rude", "cold", "great"],
        ["bathroom", "walls", "room", "staff", "breakfast", "pool"],
    );
    (reviews, lexicon)
}

/// Reference graph holding "thin walls" and a walls–rooms edge, but nothing
/// that links "noisy" with "thin" or "walls".
pub fn thin_walls_edges() -> EdgeList {
    let mut edges = EdgeList::new();
    edges.add_node("thin walls");
    edges.add_edge("walls", "rooms");
    edges
}

/// Vocabulary of one synthetic review domain.
pub struct DomainSpec {
    pub name: &'static str,
    /// Opinion bundles that tend to be reported together about an entity.
    pub clusters: &'static [&'static [(&'static str, &'static str)]],
    /// Opinions reported independently of any bundle.
    pub noise: &'static [(&'static str, &'static str)],
}

pub const DOMAINS: [DomainSpec; 3] = [
    DomainSpec {
        name: "restaurant",
        clusters: &[
            &[("fresh", "sashimi"), ("fresh", "fish"), ("great", "sushi"), ("high", "prices")],
            &[("long", "wait"), ("slow", "service"), ("busy", "kitchen")],
            &[("rude", "waiter"), ("bad", "service"), ("cold", "food")],
            &[("cozy", "atmosphere"), ("friendly", "staff"), ("good", "wine")],
        ],
        noise: &[("nice", "view"), ("small", "portions"), ("clean", "tables"), ("loud", "music")],
    },
    DomainSpec {
        name: "laptop",
        clusters: &[
            &[("short", "battery"), ("hot", "fan"), ("heavy", "charger")],
            &[("bright", "screen"), ("sharp", "display"), ("great", "colors")],
            &[("fast", "processor"), ("quick", "boot"), ("smooth", "performance")],
            &[("cheap", "plastic"), ("flimsy", "hinge"), ("loose", "keys")],
        ],
        noise: &[("nice", "keyboard"), ("good", "speakers"), ("slim", "design"), ("easy", "setup")],
    },
    DomainSpec {
        name: "hospitality",
        clusters: &[
            &[("thin", "walls"), ("noisy", "room"), ("poor", "sleep")],
            &[("clean", "bathroom"), ("fresh", "towels"), ("comfortable", "bed")],
            &[("helpful", "staff"), ("friendly", "reception"), ("quick", "checkin")],
            &[("free", "parking"), ("great", "location"), ("short", "walk")],
        ],
        noise: &[("nice", "pool"), ("good", "breakfast"), ("small", "gym"), ("fast", "wifi")],
    },
];

/// Reviews generated from `spec`: every entity holds one or two opinion
/// bundles and its reviews mostly report opinions from them.
pub fn domain_corpus(spec: &DomainSpec, n_entities: usize, reviews_per_entity: usize, seed: u64) -> Result<(Vec<Review>, Lexicon)> {
    let mut rng = crate::rng(seed);
    let mut reviews = Vec::new();
    for e in 0..n_entities {
        let entity = format!("{}-{e:03}", spec.name);
        let k = rng.gen_range(1..=2);
        let mut held: Vec<&[(&str, &str)]> = spec.clusters.choose_multiple(&mut rng, k).copied().collect();
        held.sort();
        for r in 0..reviews_per_entity {
            let n_sent = rng.gen_range(1..=3);
            let mut sentences = Vec::new();
            for _ in 0..n_sent {
                let (m, a) = if rng.gen_bool(0.8) {
                    let c = held.choose(&mut rng).expect("entity holds a bundle");
                    *c.choose(&mut rng).expect("bundles are nonempty")
                } else {
                    *spec.noise.choose(&mut rng).expect("noise list nonempty")
                };
                let s = match rng.gen_range(0..3) {
                    0 => format!("The {a} was {m}."),
                    1 => format!("{}{} {a}.", m[..1].to_uppercase(), &m[1..]),
                    _ => format!("We liked it but the {a} is {m}."),
                };
                sentences.push(s);
            }
            reviews.push(Review::new(format!("{entity}-r{r}"), entity.clone(), sentences.join(" "))?);
        }
    }
    let words: BTreeSet<(&str, &str)> = spec.clusters.iter().flat_map(|c| c.iter()).chain(spec.noise).copied().collect();
    let lexicon = Lexicon::new(words.iter().map(|w| w.0), words.iter().map(|w| w.1));
    Ok((reviews, lexicon))
}

/// A small general-purpose reference graph: every opinion phrase of even
/// index in the domain is a node, plus word edges between neighbouring
/// opinions of a bundle (aspect–aspect and modifier–next aspect) and one
/// modifier link per bundle.
pub fn reference_edges(spec: &DomainSpec) -> EdgeList {
    let mut edges = EdgeList::new();
    let all: Vec<(&str, &str)> = spec.clusters.iter().flat_map(|c| c.iter()).chain(spec.noise).copied().collect();
    for (i, (m, a)) in all.iter().enumerate() {
        if i % 2 == 0 {
            edges.add_node(&format!("{m} {a}"));
        }
        edges.add_node(a);
        edges.add_node(m);
    }
    for cluster in spec.clusters {
        for w in cluster.windows(2) {
            edges.add_edge(w[0].1, w[1].1);
            edges.add_edge(w[0].0, w[1].1);
        }
        if let [first, .., last] = cluster {
            edges.add_edge(first.0, last.0);
        }
    }
    edges
}

/// Edge list as `related_to` triples, both directions.
pub fn edge_triples(edges: &EdgeList) -> Vec<Triple> {
    let mut out: Vec<Triple> = edges
        .edges
        .iter()
        .flat_map(|(a, b)| [Triple::new(a.clone(), "related_to", b.clone()), Triple::new(b.clone(), "related_to", a.clone())])
        .collect();
    out.sort();
    out.dedup();
    out
}
