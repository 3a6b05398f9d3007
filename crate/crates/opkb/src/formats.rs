//! Readers and writers for every file the pipeline consumes or produces.
//!
//! Parsers work on strings so they can be tested without touching disk;
//! the `load_*` wrappers add the path to error messages.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use opkb_core::comprehension::{Prediction, Task};
use opkb_core::distmult::Triple;
use opkb_core::extract::{Label, Lexicon, Opinion, OpinionTuple, TagSequence};
use opkb_core::kb::{Fact, KnowledgeBase};
use opkb_core::metrics::MeanStd;
use opkb_core::text::{AbsaExample, EdgeList, Polarity, QaExample, Review, Token, TokenSequence, TokenSpan, WordVectors};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Failure, Result};

pub const KB_HEADER: &str = "premise_modifier\tpremise_aspect\tconclusion_modifier\tconclusion_aspect\tweight";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        text.push_str(&line);
        text.push('\n');
    }
    write_bytes(path, text.as_bytes())
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<(usize, T)>> {
    lines(text)
        .map(|(n, l)| {
            serde_json::from_str(l)
                .map(|v| (n, v))
                .map_err(|e| Failure::data(format!("malformed line {n}: {e}")))
        })
        .collect()
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Failure::Data(m) => Failure::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

// ---------------------------------------------------------------- reviews

pub fn parse_reviews(text: &str) -> Result<Vec<Review>> {
    let mut out = Vec::new();
    for (n, line) in lines(text) {
        let v: Value = serde_json::from_str(line).map_err(|e| Failure::data(format!("malformed JSON at line {n}: {e}")))?;
        let obj = v
            .as_object()
            .ok_or_else(|| Failure::data(format!("line {n} is not a JSON object")))?;
        let field = |key: &str| -> Result<&str> {
            match obj.get(key) {
                None => Err(Failure::data(format!("missing key {key} at line {n}"))),
                Some(Value::String(s)) => Ok(s),
                Some(_) => Err(Failure::data(format!("key {key} at line {n} must be a string"))),
            }
        };
        let (id, entity, body) = (field("id")?, field("entity")?, field("text")?);
        out.push(Review::new(id, entity, body).map_err(|e| Failure::in_data(format!("line {n}"), e))?);
    }
    Ok(out)
}

pub fn load_reviews(path: &Path) -> Result<Vec<Review>> {
    with_path(path, parse_reviews(&read_text(path)?))
}

// ---------------------------------------------------------------- QA

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QaRecord {
    #[serde(default)]
    id: Option<String>,
    review_id: String,
    question: String,
    answer_start: usize,
    answer_end: usize,
}

/// QA records refer to reviews by id. Records without an `id` get
/// `"<review_id>-q<k>"`, `k` counting from 0 per review.
pub fn parse_qa(text: &str, reviews: &[Review]) -> Result<Vec<QaExample>> {
    let records: Vec<QaRecord> =
        serde_json::from_str(text).map_err(|e| Failure::data(format!("malformed QA dataset: {e}")))?;
    let by_id: BTreeMap<&str, &Review> = reviews.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut per_review: BTreeMap<String, usize> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (i, r) in records.into_iter().enumerate() {
        let review = by_id
            .get(r.review_id.as_str())
            .ok_or_else(|| Failure::data(format!("QA record {i}: unknown review id `{}`", r.review_id)))?;
        let k = per_review.entry(r.review_id.clone()).or_insert(0);
        let id = r.id.unwrap_or_else(|| format!("{}-q{k}", r.review_id));
        *k += 1;
        if !seen.insert(id.clone()) {
            return Err(Failure::data(format!("QA record {i}: duplicate id `{id}`")));
        }
        let ex = QaExample::new(id, (*review).clone(), r.question, r.answer_start, r.answer_end)
            .map_err(|e| Failure::in_data(format!("QA record {i}"), e))?;
        out.push(ex);
    }
    Ok(out)
}

pub fn load_qa(qa: &Path, reviews: &Path) -> Result<Vec<QaExample>> {
    let reviews = load_reviews(reviews)?;
    with_path(qa, parse_qa(&read_text(qa)?, &reviews))
}

// ---------------------------------------------------------------- ABSA

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AbsaRecord {
    #[serde(default)]
    id: Option<String>,
    text: String,
    #[serde(default)]
    aspects: Vec<TokenSpan>,
    #[serde(default)]
    target: Option<TokenSpan>,
    #[serde(default)]
    polarity: Option<Polarity>,
}

/// Token ranges are inclusive. Records without an `id` get `"line<n>"`.
pub fn parse_absa(text: &str) -> Result<Vec<AbsaExample>> {
    parse_jsonl::<AbsaRecord>(text)?
        .into_iter()
        .map(|(n, r)| {
            let id = r.id.unwrap_or_else(|| format!("line{n}"));
            AbsaExample::new(id, &r.text, r.aspects, r.target, r.polarity)
                .map_err(|e| Failure::in_data(format!("line {n}"), e))
        })
        .collect()
}

pub fn load_absa(path: &Path) -> Result<Vec<AbsaExample>> {
    with_path(path, parse_absa(&read_text(path)?))
}

// ---------------------------------------------------------------- word vectors, edges, lexicon

pub fn parse_word_vectors(text: &str) -> Result<WordVectors> {
    let mut table: Option<WordVectors> = None;
    for (row, (n, line)) in lines(text).enumerate() {
        let row = row + 1;
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default();
        let values: Vec<f64> = parts
            .map(|p| p.parse::<f64>().map_err(|_| Failure::data(format!("row {row} (line {n}): invalid number `{p}`"))))
            .collect::<Result<_>>()?;
        if values.is_empty() {
            return Err(Failure::data(format!("row {row} (line {n}): no vector values")));
        }
        let wv = match &mut table {
            Some(t) => t,
            None => table.insert(WordVectors::new(values.len())?),
        };
        if values.len() != wv.dim() {
            return Err(Failure::data(format!(
                "inconsistent dimension at row {row}: expected {}, got {}",
                wv.dim(),
                values.len()
            )));
        }
        wv.insert(word, values)?;
    }
    table.ok_or_else(|| Failure::data("word vector file has no rows"))
}

pub fn load_word_vectors(path: &Path) -> Result<WordVectors> {
    with_path(path, parse_word_vectors(&read_text(path)?))
}

/// Two phrases per line add an edge; a single phrase adds a bare node.
pub fn parse_edge_list(text: &str) -> Result<EdgeList> {
    let mut edges = EdgeList::new();
    for (n, line) in lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [a] => {
                edges.add_node(a);
            }
            [a, b] if !a.trim().is_empty() && !b.trim().is_empty() => edges.add_edge(a, b),
            _ => return Err(Failure::data(format!("line {n}: expected `phrase1<TAB>phrase2`"))),
        }
    }
    Ok(edges)
}

pub fn load_edge_list(path: &Path) -> Result<EdgeList> {
    with_path(path, parse_edge_list(&read_text(path)?))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    adjectives: Vec<String>,
    aspect_nouns: Vec<String>,
}

pub fn parse_lexicon(text: &str) -> Result<Lexicon> {
    let f: LexiconFile = serde_json::from_str(text).map_err(|e| Failure::data(format!("malformed lexicon: {e}")))?;
    if f.adjectives.is_empty() || f.aspect_nouns.is_empty() {
        return Err(Failure::data("lexicon needs at least one adjective and one aspect noun"));
    }
    Ok(Lexicon::new(f.adjectives, f.aspect_nouns))
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    with_path(path, parse_lexicon(&read_text(path)?))
}

pub fn lexicon_json(lexicon: &Lexicon) -> Value {
    serde_json::json!({
        "adjectives": lexicon.adjectives,
        "aspect_nouns": lexicon.aspect_nouns,
    })
}

// ---------------------------------------------------------------- tagging data, triples

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaggingRecord {
    tokens: Vec<String>,
    labels: Vec<String>,
}

/// Pre-tokenized sentences; character spans assume single spaces between tokens.
pub fn parse_tagging(text: &str) -> Result<Vec<(TokenSequence, TagSequence)>> {
    parse_jsonl::<TaggingRecord>(text)?
        .into_iter()
        .map(|(n, r)| {
            if r.tokens.len() != r.labels.len() {
                return Err(Failure::data(format!(
                    "line {n}: {} tokens but {} labels",
                    r.tokens.len(),
                    r.labels.len()
                )));
            }
            let mut pos = 0;
            let tokens = r
                .tokens
                .into_iter()
                .map(|surface| {
                    let len = surface.chars().count();
                    let t = Token {
                        surface,
                        char_start: pos,
                        char_end: pos + len,
                        synthetic: false,
                    };
                    pos += len + 1;
                    t
                })
                .collect();
            let labels = r
                .labels
                .iter()
                .map(|l| l.parse::<Label>().map_err(|e| Failure::in_data(format!("line {n}"), e)))
                .collect::<Result<_>>()?;
            Ok((TokenSequence::new(tokens), TagSequence { labels }))
        })
        .collect()
}

pub fn load_tagging(path: &Path) -> Result<Vec<(TokenSequence, TagSequence)>> {
    with_path(path, parse_tagging(&read_text(path)?))
}

pub fn parse_triples(text: &str) -> Result<Vec<Triple>> {
    lines(text)
        .map(|(n, line)| match line.split('\t').collect::<Vec<_>>().as_slice() {
            [h, r, t] => Ok(Triple::new(h.trim(), r.trim(), t.trim())),
            _ => Err(Failure::data(format!("line {n}: expected `head<TAB>relation<TAB>tail`"))),
        })
        .collect()
}

pub fn load_triples(path: &Path) -> Result<Vec<Triple>> {
    with_path(path, parse_triples(&read_text(path)?))
}

pub fn triples_tsv(triples: &[Triple]) -> String {
    triples
        .iter()
        .map(|t| format!("{}\t{}\t{}\n", t.head, t.relation, t.tail))
        .collect()
}

// ---------------------------------------------------------------- extraction output

/// One line of the `extract` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewTuples {
    pub review_id: String,
    pub entity: String,
    pub tuples: Vec<OpinionTuple>,
}

pub fn load_tuples(path: &Path) -> Result<Vec<ReviewTuples>> {
    let parsed = with_path(path, parse_jsonl::<ReviewTuples>(&read_text(path)?))?;
    Ok(parsed.into_iter().map(|(_, r)| r).collect())
}

// ---------------------------------------------------------------- knowledge base

/// The opinions list written next to a KB file.
pub fn kb_sidecar(path: &Path) -> PathBuf {
    path.with_extension("opinions")
}

pub fn kb_tsv(kb: &KnowledgeBase) -> String {
    let mut out = String::from(KB_HEADER);
    out.push('\n');
    for f in &kb.facts {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            f.premise.modifier, f.premise.aspect, f.conclusion.modifier, f.conclusion.aspect, f.weight
        ));
    }
    out
}

pub fn kb_opinions(kb: &KnowledgeBase) -> String {
    kb.opinions.iter().map(|o| o.key() + "\n").collect()
}

pub fn save_kb(kb: &KnowledgeBase, path: &Path) -> Result<()> {
    write_bytes(path, kb_tsv(kb).as_bytes())?;
    write_bytes(&kb_sidecar(path), kb_opinions(kb).as_bytes())
}

pub fn parse_kb(domain: &str, tsv: &str, opinions: &str) -> Result<KnowledgeBase> {
    let mut rows = tsv.lines().enumerate();
    match rows.next() {
        Some((_, h)) if h.trim_end() == KB_HEADER => {}
        _ => return Err(Failure::data(format!("KB file must start with the header `{}`", KB_HEADER.replace('\t', " ")))),
    }
    let mut facts = Vec::new();
    for (i, line) in rows {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [pm, pa, cm, ca, w] = f.as_slice() else {
            return Err(Failure::data(format!("line {}: expected 5 tab-separated fields", i + 1)));
        };
        let weight = w
            .parse::<f64>()
            .map_err(|_| Failure::data(format!("line {}: invalid weight `{w}`", i + 1)))?;
        facts.push(Fact {
            premise: Opinion::new(pm, pa),
            conclusion: Opinion::new(cm, ca),
            weight,
        });
    }
    // Keys alone cannot say where a multi-word modifier ends, so they are
    // matched against fact endpoints first.
    let known: BTreeMap<String, Opinion> = facts
        .iter()
        .flat_map(|f| [f.premise.clone(), f.conclusion.clone()])
        .map(|o| (o.key(), o))
        .collect();
    let mut ops = Vec::new();
    for (n, key) in lines(opinions) {
        let key = key.trim();
        let op = match known.get(key) {
            Some(o) => o.clone(),
            None => {
                let (m, a) = key
                    .rsplit_once(' ')
                    .ok_or_else(|| Failure::data(format!("opinions line {n}: `{key}` is not a `modifier aspect` key")))?;
                Opinion::new(m, a)
            }
        };
        ops.push(op);
    }
    KnowledgeBase::from_parts(domain, ops, facts).map_err(|e| Failure::in_data("knowledge base", e))
}

pub fn load_kb(path: &Path, domain: &str) -> Result<KnowledgeBase> {
    let tsv = read_text(path)?;
    let opinions = read_text(&kb_sidecar(path))?;
    with_path(path, parse_kb(domain, &tsv, &opinions))
}

// ---------------------------------------------------------------- predictions and reports

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let parsed = with_path(path, parse_jsonl::<Prediction>(&read_text(path)?))?;
    Ok(parsed.into_iter().map(|(_, p)| p).collect())
}

/// Scores of one task aggregated over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub task: Task,
    pub metrics: BTreeMap<String, MeanStd>,
    pub n_runs: usize,
    pub seed_list: Vec<u64>,
}

/// One line of the `embed` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseVector {
    pub phrase: String,
    pub vector: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_review_line() {
        let text = r#"{"id":"r1","entity":"h1","text":"The bathroom is very clean but the food is average."}"#;
        let reviews = parse_reviews(text).unwrap();
        assert_eq!(reviews.len(), 1);
        assert_eq!(reviews[0].sentences.len(), 1);
        assert_eq!(reviews[0].token_count(), 11);
        assert!(parse_reviews("").unwrap().is_empty());
    }

    #[test]
    fn review_errors_name_key_and_line() {
        let err = parse_reviews(r#"{"id":"r1","text":"x"}"#).unwrap_err();
        assert!(err.to_string().contains("missing key entity at line 1"), "{err}");
        assert_eq!(err.exit_code(), 3);
        let err = parse_reviews("{\"id\":\"a\",\"entity\":\"e\",\"text\":\"ok\"}\n\n{oops").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn word_vectors_and_dimension_errors() {
        let wv = parse_word_vectors("good 0.1 0.2\nbad 0.3 0.4\n").unwrap();
        assert_eq!((wv.dim(), wv.len()), (2, 2));
        assert_eq!(wv.get("bad"), Some(&[0.3, 0.4][..]));
        let err = parse_word_vectors("good 0.1 0.2\nbad 0.3 0.4 0.5\n").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn edge_list_parse() {
        let e = parse_edge_list("thin walls\tnoisy room\n").unwrap();
        assert_eq!((e.nodes.len(), e.edges.len()), (2, 1));
        let e = parse_edge_list("Thin  Walls\tNoisy room\n").unwrap();
        assert!(e.has_edge("noisy room", "thin walls"));
        assert!(parse_edge_list("a\tb\tc\n").is_err());
    }

    #[test]
    fn kb_round_trip() {
        let facts = vec![
            Fact {
                premise: Opinion::new("very thin", "walls"),
                conclusion: Opinion::new("noisy", "room"),
                weight: 0.123456789012345,
            },
            Fact {
                premise: Opinion::new("fresh", "sashimi"),
                conclusion: Opinion::new("high", "prices"),
                weight: 1.0,
            },
        ];
        let kb = KnowledgeBase::from_facts("hotel", facts).unwrap();
        let back = parse_kb("hotel", &kb_tsv(&kb), &kb_opinions(&kb)).unwrap();
        assert_eq!(back, kb);
        assert!(kb_tsv(&kb).starts_with(KB_HEADER));
        assert!(parse_kb("hotel", "bad header\n", "").is_err());
    }

    #[test]
    fn qa_ids_and_bounds() {
        let reviews = parse_reviews(r#"{"id":"r1","entity":"h","text":"Thin walls. Loud."}"#).unwrap();
        let qa = parse_qa(
            r#"[{"review_id":"r1","question":"why?","answer_start":0,"answer_end":11},
                {"review_id":"r1","question":"again?","answer_start":12,"answer_end":17}]"#,
            &reviews,
        )
        .unwrap();
        assert_eq!(qa[0].id, "r1-q0");
        assert_eq!(qa[1].id, "r1-q1");
        assert_eq!(qa[0].answer_text(), "Thin walls.");
        let bad = r#"[{"review_id":"r1","question":"q","answer_start":0,"answer_end":99}]"#;
        assert_eq!(parse_qa(bad, &reviews).unwrap_err().exit_code(), 3);
        let unknown = r#"[{"review_id":"zz","question":"q","answer_start":0,"answer_end":1}]"#;
        assert!(parse_qa(unknown, &reviews).unwrap_err().to_string().contains("zz"));
    }

    #[test]
    fn absa_and_tagging_parse() {
        let absa = parse_absa(
            "{\"text\":\"The food is great.\",\"aspects\":[{\"start\":1,\"end\":1}],\"target\":{\"start\":1,\"end\":1},\"polarity\":\"positive\"}\n",
        )
        .unwrap();
        assert_eq!(absa[0].id, "line1");
        assert_eq!(absa[0].polarity, Some(Polarity::Positive));
        assert!(parse_absa("{\"text\":\"x\",\"polarity\":\"positive\"}").is_err());

        let tagged = parse_tagging("{\"tokens\":[\"very\",\"clean\",\"bathroom\"],\"labels\":[\"B-MOD\",\"I-MOD\",\"B-ASP\"]}").unwrap();
        assert_eq!(tagged[0].0.tokens[2].char_start, 11);
        assert_eq!(tagged[0].1.labels, [Label::BMod, Label::IMod, Label::BAsp]);
        assert!(parse_tagging("{\"tokens\":[\"a\"],\"labels\":[]}").is_err());
    }

    #[test]
    fn triples_round_trip() {
        let t = vec![Triple::new("e00", "same_block", "e01")];
        assert_eq!(parse_triples(&triples_tsv(&t)).unwrap(), t);
        assert!(parse_triples("a\tb\n").is_err());
    }
}
