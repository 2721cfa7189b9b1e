//! Seeded synthetic benchmark generators with exact ground truth, plus
//! scorers. Every instance's truth is recomputable from its document by a
//! brute-force pass, and identical `(generator, n, seed)` inputs yield
//! byte-identical instances. Instance documents embed a task marker near
//! the start so the detection phase has something to key on; filler tokens
//! are semantically inert.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::answers::TaskType;
use crate::doc::Document;
use crate::oracle::derive_seed;

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

/// Task-specific expected answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truth {
    /// A single value, e.g. the needle's payload or a joined entity.
    Value { value: String },
    /// Exact per-category counts.
    Counts { counts: BTreeMap<String, u64> },
    /// All qualifying pairs `(i, j)` with `i < j`.
    Pairs { pairs: BTreeSet<(u64, u64)> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskInstance {
    pub schema_version: u32,
    pub task: TaskType,
    /// Token count of `doc`, or the whole corpus for multi-hop.
    pub n: usize,
    pub seed: u64,
    /// The external prompt. For multi-hop instances this is the query-bearing
    /// document; the corpus carries the content.
    pub doc: Document,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub corpus: Vec<Document>,
    pub query: Document,
    pub truth: Truth,
    /// Token position of each item's classification token inside `doc`,
    /// keyed by item id. Lets simulations locate which leaf handled an item.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub item_positions: Vec<(u64, usize)>,
}

impl TaskInstance {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<TaskInstance, serde_json::Error> {
        serde_json::from_str(text)
    }
}

const FILLER: [&str; 16] = [
    "orbis", "campo", "videt", "solem", "umbra", "litus", "petra", "fluvi", "silva", "monte",
    "aequo", "tempus", "verba", "culta", "porta", "navis",
];

fn filler_token(rng: &mut ChaCha8Rng) -> String {
    FILLER[rng.gen_range(0..FILLER.len())].to_string()
}

const CATEGORY_NAMES: [&str; 8] = ["desc", "num", "date", "name", "loc", "code", "misc", "refs"];

fn category_name(i: usize) -> String {
    if i < CATEGORY_NAMES.len() {
        CATEGORY_NAMES[i].to_string()
    } else {
        format!("cat{i}")
    }
}

const PAIR_LABELS: [&str; 5] = ["A", "B", "C", "D", "E"];

fn gen_rng(task: TaskType, n: usize, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[seed, task as u64 + 1, n as u64]))
}

/// Needle-in-a-haystack: `n` filler tokens with a single key–value needle at
/// a seeded position. The truth is the value; the query names the key. Only
/// the task marker sits in the document header, so the key appears nowhere
/// outside the needle itself.
pub fn gen_needle(n: usize, seed: u64) -> TaskInstance {
    assert!(n >= 100, "gen_needle requires n >= 100");
    let mut rng = gen_rng(TaskType::Search, n, seed);
    let key = format!("key-{}", rng.gen_range(0..1_000_000u64));
    let value = format!("val-{}", rng.gen_range(0..1_000_000u64));
    let position = rng.gen_range(1..n);
    let mut tokens = Vec::with_capacity(n);
    tokens.push(TaskType::Search.marker().to_string());
    while tokens.len() < n {
        if tokens.len() == position {
            tokens.push(format!("needle:{key}={value}"));
        } else {
            tokens.push(filler_token(&mut rng));
        }
    }
    let query = Document::from_tokens(vec![
        TaskType::Search.marker().to_string(),
        "find".to_string(),
        key,
    ]);
    TaskInstance {
        schema_version: INSTANCE_SCHEMA_VERSION,
        task: TaskType::Search,
        n,
        seed,
        doc: Document::from_tokens(tokens),
        corpus: Vec::new(),
        query,
        truth: Truth::Value { value },
        item_positions: vec![(0, position)],
    }
}

/// Labelled question stream: exactly `n` tokens of `q<id> label:<cat> ...`
/// lines. The truth is the exact per-category count map; the query asks
/// which category is least common. The first category is generated rarest.
pub fn gen_aggregate(n: usize, categories: usize, seed: u64) -> TaskInstance {
    assert!(categories >= 2, "gen_aggregate requires categories >= 2");
    assert!(n >= 16, "gen_aggregate requires n >= 16");
    let mut rng = gen_rng(TaskType::Aggregate, n, seed);
    let header = [TaskType::Aggregate.marker(), "which", "category", "least-common"];
    // index 0 is heavily under-weighted so the least-common answer has a
    // wide margin
    let weights: Vec<u64> = (0..categories)
        .map(|i| if i == 0 { 1 } else { 2 + 2 * i as u64 })
        .collect();
    let total_weight: u64 = weights.iter().sum();

    let mut tokens: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut item_positions = Vec::new();
    let mut next_id = 0u64;
    while tokens.len() + 2 <= n {
        let draw = rng.gen_range(0..total_weight);
        let mut acc = 0;
        let mut cat_index = 0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if draw < acc {
                cat_index = i;
                break;
            }
        }
        let cat = category_name(cat_index);
        tokens.push(format!("q{next_id}"));
        item_positions.push((next_id, tokens.len()));
        tokens.push(format!("label:{cat}"));
        *counts.entry(cat).or_insert(0) += 1;
        next_id += 1;
        let pad = rng.gen_range(0..4usize).min(n - tokens.len());
        for _ in 0..pad {
            tokens.push(filler_token(&mut rng));
        }
    }
    while tokens.len() < n {
        tokens.push(filler_token(&mut rng));
    }
    let query = Document::from_tokens(header.iter().map(|s| s.to_string()).collect());
    TaskInstance {
        schema_version: INSTANCE_SCHEMA_VERSION,
        task: TaskType::Aggregate,
        n,
        seed,
        doc: Document::from_tokens(tokens),
        corpus: Vec::new(),
        query,
        truth: Truth::Counts { counts },
        item_positions,
    }
}

/// Labelled items for pairwise matching; the truth is every same-label pair
/// `(i, j)` with `i < j`.
pub fn gen_pairwise(items: usize, seed: u64) -> TaskInstance {
    assert!(items >= 2, "gen_pairwise requires items >= 2");
    let mut rng = gen_rng(TaskType::Pairwise, items, seed);
    let header = [TaskType::Pairwise.marker(), "same-label", "pairs"];
    let mut tokens: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    let mut labels = Vec::with_capacity(items);
    let mut item_positions = Vec::new();
    for id in 0..items as u64 {
        let label = PAIR_LABELS[rng.gen_range(0..PAIR_LABELS.len())];
        item_positions.push((id, tokens.len()));
        tokens.push(format!("rec:{id}:{label}"));
        labels.push(label);
        for _ in 0..rng.gen_range(0..3usize) {
            tokens.push(filler_token(&mut rng));
        }
    }
    let mut pairs = BTreeSet::new();
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            if labels[i] == labels[j] {
                pairs.insert((i as u64, j as u64));
            }
        }
    }
    let n = tokens.len();
    let query = Document::from_tokens(header.iter().map(|s| s.to_string()).collect());
    TaskInstance {
        schema_version: INSTANCE_SCHEMA_VERSION,
        task: TaskType::Pairwise,
        n,
        seed,
        doc: Document::from_tokens(tokens),
        corpus: Vec::new(),
        query,
        truth: Truth::Pairs { pairs },
        item_positions,
    }
}

/// A corpus whose answer requires joining facts from exactly two documents:
/// one holds `alpha -> beta`, another `beta -> gamma`, and the query asks
/// where `alpha` ultimately leads. Both chain documents (plus one topical
/// distractor when the corpus is large enough) carry the query's topic tag
/// inside the preview window; the rest of the corpus is off-topic.
pub fn gen_multihop(docs: usize, seed: u64) -> TaskInstance {
    assert!(docs >= 2, "gen_multihop requires docs >= 2");
    let mut rng = gen_rng(TaskType::MultiHop, docs, seed);
    let run = rng.gen_range(0..1_000_000u64);
    let topic = format!("topic:t{run}");
    let alpha = format!("alpha{run}");
    let beta = format!("beta{run}");
    let gamma = format!("gamma{run}");

    let mut make_doc = |topic_tag: &str, fact: Option<String>| {
        let len = rng.gen_range(60..160usize);
        let mut tokens = vec![topic_tag.to_string()];
        let fact_at = rng.gen_range(1..len - 1);
        while tokens.len() < len {
            if tokens.len() == fact_at {
                if let Some(f) = &fact {
                    tokens.push(f.clone());
                    continue;
                }
            }
            tokens.push(filler_token(&mut rng));
        }
        Document::from_tokens(tokens)
    };

    let mut corpus = Vec::with_capacity(docs);
    corpus.push(make_doc(&topic, Some(format!("fact:{alpha}->{beta}"))));
    corpus.push(make_doc(&topic, Some(format!("fact:{beta}->{gamma}"))));
    if docs >= 3 {
        // topical distractor: relevant-looking, carries an unrelated fact
        corpus.push(make_doc(&topic, Some(format!("fact:delta{run}->eps{run}"))));
    }
    for i in corpus.len()..docs {
        let off_topic = format!("topic:off{i}");
        corpus.push(make_doc(&off_topic, Some(format!("fact:u{i}->v{i}"))));
    }

    let query_tokens: Vec<String> = vec![
        TaskType::MultiHop.marker().to_string(),
        topic,
        "find".to_string(),
        "target-for".to_string(),
        alpha,
    ];
    let query = Document::from_tokens(query_tokens);
    let n = corpus.iter().map(Document::len).sum();
    TaskInstance {
        schema_version: INSTANCE_SCHEMA_VERSION,
        task: TaskType::MultiHop,
        n,
        seed,
        doc: query.clone(),
        corpus,
        query,
        truth: Truth::Value { value: gamma },
        item_positions: Vec::new(),
    }
}

/// Recomputes an instance's truth from its document(s) by brute force,
/// independent of the generator's bookkeeping.
pub fn recompute_truth(instance: &TaskInstance) -> Truth {
    match instance.task {
        TaskType::Search => {
            let mut found = None;
            for tok in instance.doc.tokens() {
                if let Some(rest) = tok.strip_prefix("needle:") {
                    if let Some((_, value)) = rest.split_once('=') {
                        assert!(found.is_none(), "generator must embed exactly one needle");
                        found = Some(value.to_string());
                    }
                }
            }
            Truth::Value {
                value: found.expect("needle present"),
            }
        }
        TaskType::Aggregate | TaskType::Classify | TaskType::Summarise => {
            let mut counts = BTreeMap::new();
            for tok in instance.doc.tokens() {
                if let Some(cat) = tok.strip_prefix("label:") {
                    *counts.entry(cat.to_string()).or_insert(0) += 1;
                }
            }
            Truth::Counts { counts }
        }
        TaskType::Pairwise => {
            let mut items = Vec::new();
            for tok in instance.doc.tokens() {
                if let Some(rest) = tok.strip_prefix("rec:") {
                    if let Some((id, label)) = rest.split_once(':') {
                        items.push((id.parse::<u64>().unwrap(), label.to_string()));
                    }
                }
            }
            let mut pairs = BTreeSet::new();
            for i in 0..items.len() {
                for j in (i + 1)..items.len() {
                    if items[i].1 == items[j].1 {
                        pairs.insert((items[i].0.min(items[j].0), items[i].0.max(items[j].0)));
                    }
                }
            }
            Truth::Pairs { pairs }
        }
        TaskType::MultiHop => {
            let mut edges = Vec::new();
            for doc in &instance.corpus {
                for tok in doc.tokens() {
                    if let Some(rest) = tok.strip_prefix("fact:") {
                        if let Some((src, dst)) = rest.split_once("->") {
                            edges.push((src.to_string(), dst.to_string()));
                        }
                    }
                }
            }
            let start = instance
                .query
                .tokens()
                .skip_while(|t| *t != "target-for")
                .nth(1)
                .expect("query names a start entity")
                .to_string();
            let mut current = start;
            let mut hops = 0;
            while hops <= edges.len() {
                match edges.iter().find(|(src, _)| *src == current) {
                    Some((_, dst)) => {
                        current = dst.clone();
                        hops += 1;
                    }
                    None => break,
                }
            }
            Truth::Value { value: current }
        }
    }
}

/// The aggregate query's answer: the least common category, ties broken
/// toward the lexicographically smaller name.
pub fn least_common(counts: &BTreeMap<String, u64>) -> Option<&str> {
    counts
        .iter()
        .min_by_key(|(name, count)| (**count, name.as_str()))
        .map(|(name, _)| name.as_str())
}

pub fn render_pairs(pairs: &BTreeSet<(u64, u64)>) -> Document {
    Document::from_tokens(pairs.iter().map(|(a, b)| format!("{a}-{b}")).collect())
}

pub fn parse_pairs(doc: &Document) -> BTreeSet<(u64, u64)> {
    doc.tokens()
        .filter_map(|t| {
            let (a, b) = t.split_once('-')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Exact,
    F1,
}

fn set_f1<T: Ord>(predicted: &BTreeSet<T>, truth: &BTreeSet<T>) -> f64 {
    if predicted.is_empty() && truth.is_empty() {
        return 1.0;
    }
    let overlap = predicted.intersection(truth).count();
    if overlap == 0 {
        return 0.0;
    }
    2.0 * overlap as f64 / (predicted.len() + truth.len()) as f64
}

/// Scores a rendered answer document against the truth. `Exact` is an
/// indicator; `F1` is a set overlap over pairs, count entries, or tokens.
pub fn score(answer: &Document, truth: &Truth, metric: Metric) -> f64 {
    match truth {
        Truth::Value { value } => {
            let predicted: BTreeSet<String> = answer.tokens().map(str::to_owned).collect();
            let expected: BTreeSet<String> = [value.clone()].into();
            match metric {
                Metric::Exact => f64::from(answer.to_text() == *value),
                Metric::F1 => set_f1(&predicted, &expected),
            }
        }
        Truth::Counts { counts } => {
            let predicted = crate::answers::parse_counts(answer);
            match metric {
                Metric::Exact => f64::from(predicted == *counts),
                Metric::F1 => {
                    let p: BTreeSet<(String, u64)> = predicted.into_iter().collect();
                    let t: BTreeSet<(String, u64)> =
                        counts.iter().map(|(k, v)| (k.clone(), *v)).collect();
                    set_f1(&p, &t)
                }
            }
        }
        Truth::Pairs { pairs } => {
            let predicted = parse_pairs(answer);
            match metric {
                Metric::Exact => f64::from(predicted == *pairs),
                Metric::F1 => set_f1(&predicted, pairs),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needle_instances_have_exactly_one_needle() {
        for seed in 0..20 {
            let inst = gen_needle(500, seed);
            assert_eq!(inst.doc.len(), 500);
            let needles = inst
                .doc
                .tokens()
                .filter(|t| t.starts_with("needle:"))
                .count();
            assert_eq!(needles, 1);
            assert_eq!(recompute_truth(&inst), inst.truth);
        }
    }

    #[test]
    fn needle_position_varies_with_seed_at_fixed_n() {
        let a = gen_needle(400, 1);
        let b = gen_needle(400, 2);
        assert_eq!(a.doc.len(), b.doc.len());
        assert_ne!(a.item_positions[0].1, b.item_positions[0].1);
    }

    #[test]
    fn generators_are_reproducible() {
        let a = gen_aggregate(2_000, 5, 42);
        let b = gen_aggregate(2_000, 5, 42);
        assert_eq!(a.to_json(), b.to_json());
        let c = gen_aggregate(2_000, 5, 43);
        assert_ne!(a.doc, c.doc);
    }

    #[test]
    fn aggregate_counts_sum_to_item_lines() {
        let inst = gen_aggregate(3_000, 4, 7);
        assert_eq!(inst.doc.len(), 3_000);
        let Truth::Counts { counts } = &inst.truth else {
            panic!("aggregate truth is counts");
        };
        let items = inst.doc.tokens().filter(|t| t.starts_with("label:")).count() as u64;
        assert_eq!(counts.values().sum::<u64>(), items);
        assert_eq!(counts.values().sum::<u64>(), inst.item_positions.len() as u64);
        assert_eq!(recompute_truth(&inst), inst.truth);
        // item positions point at label tokens
        for (id, pos) in inst.item_positions.iter().take(20) {
            let tok = inst.doc.token(*pos).unwrap();
            assert!(tok.starts_with("label:"), "item {id} at {pos}: {tok}");
        }
    }

    #[test]
    fn appendix_shaped_aggregate_answers_desc() {
        let inst = gen_aggregate(131_000, 5, 11);
        let Truth::Counts { counts } = &inst.truth else {
            panic!();
        };
        assert_eq!(least_common(counts), Some("desc"));
    }

    #[test]
    fn pairwise_truth_matches_combinatorial_identity() {
        for seed in 0..10 {
            let inst = gen_pairwise(80, seed);
            let Truth::Pairs { pairs } = &inst.truth else {
                panic!();
            };
            let mut per_label: BTreeMap<String, u64> = BTreeMap::new();
            for tok in inst.doc.tokens() {
                if let Some(rest) = tok.strip_prefix("rec:") {
                    let (_, label) = rest.split_once(':').unwrap();
                    *per_label.entry(label.to_string()).or_insert(0) += 1;
                }
            }
            let expected: u64 = per_label.values().map(|c| c * (c - 1) / 2).sum();
            assert_eq!(pairs.len() as u64, expected);
            assert_eq!(recompute_truth(&inst), inst.truth);
        }
    }

    #[test]
    fn multihop_truth_needs_two_documents() {
        let inst = gen_multihop(40, 3);
        assert_eq!(inst.corpus.len(), 40);
        let Truth::Value { value } = &inst.truth else {
            panic!();
        };
        assert!(value.starts_with("gamma"));
        assert_eq!(recompute_truth(&inst), inst.truth);
        // no single document's facts reach gamma from alpha
        let start: String = inst
            .query
            .tokens()
            .skip_while(|t| *t != "target-for")
            .nth(1)
            .unwrap()
            .to_string();
        for doc in &inst.corpus {
            let edges: Vec<(String, String)> = doc
                .tokens()
                .filter_map(|t| t.strip_prefix("fact:"))
                .filter_map(|r| r.split_once("->"))
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect();
            let mut current = start.clone();
            let mut hops = 0;
            while hops <= edges.len() {
                match edges.iter().find(|(s, _)| *s == current) {
                    Some((_, d)) => {
                        current = d.clone();
                        hops += 1;
                    }
                    None => break,
                }
            }
            assert_ne!(&current, value, "single doc must not reach the answer");
        }
    }

    #[test]
    fn scoring_rules() {
        // identical answers score 1.0
        let truth = Truth::Value {
            value: "val-7".into(),
        };
        assert_eq!(score(&Document::from_text("val-7"), &truth, Metric::Exact), 1.0);
        assert_eq!(score(&Document::from_text("val-8"), &truth, Metric::Exact), 0.0);

        // half of the truth pairs predicted, no false positives: F1 = 2/3
        let pairs: BTreeSet<(u64, u64)> = [(0, 1), (0, 2), (1, 2), (3, 4)].into();
        let truth = Truth::Pairs { pairs };
        let predicted: BTreeSet<(u64, u64)> = [(0, 1), (3, 4)].into();
        let f1 = score(&render_pairs(&predicted), &truth, Metric::F1);
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);

        // empty prediction vs nonempty truth scores 0
        assert_eq!(score(&Document::empty(), &truth, Metric::F1), 0.0);
        assert_eq!(score(&Document::empty(), &truth, Metric::Exact), 0.0);
    }

    #[test]
    fn instance_json_round_trips() {
        let inst = gen_pairwise(30, 5);
        let json = inst.to_json();
        let back = TaskInstance::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
        assert_eq!(back.truth, inst.truth);
        assert_eq!(back.doc, inst.doc);
    }
}
