//! Shared wire formats: task types, prompt headers, and the token encodings
//! answers travel in.
//!
//! Documents are flat token sequences, so every structured payload is packed
//! into single tokens that cannot be divided by a chunk boundary:
//!
//! - needle:          `needle:<key>=<value>`
//! - labelled item:   `label:<category>` (aggregation), `rec:<id>:<label>`
//!   (classification / pairwise)
//! - count entry:     `<category>:<count>` in answer documents
//! - label record:    `<id>:<label>` in answer documents
//! - corpus fact:     `fact:<src>-><dst>`, topic tag `topic:<t>`
//!
//! Malformed records are dropped and counted, never fatal.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::doc::Document;

/// The six task families the planner can dispatch on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Search,
    Classify,
    Aggregate,
    Pairwise,
    Summarise,
    MultiHop,
}

impl TaskType {
    pub const ALL: [TaskType; 6] = [
        TaskType::Search,
        TaskType::Classify,
        TaskType::Aggregate,
        TaskType::Pairwise,
        TaskType::Summarise,
        TaskType::MultiHop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskType::Search => "search",
            TaskType::Classify => "classify",
            TaskType::Aggregate => "aggregate",
            TaskType::Pairwise => "pairwise",
            TaskType::Summarise => "summarise",
            TaskType::MultiHop => "multi_hop",
        }
    }

    pub fn from_name(name: &str) -> Option<TaskType> {
        TaskType::ALL.iter().copied().find(|t| t.name() == name)
    }

    /// Marker token generators embed near the start of an instance; the
    /// rule-based detector keys on it.
    pub fn marker(self) -> &'static str {
        match self {
            TaskType::Search => "needle-task",
            TaskType::Classify => "classify-task",
            TaskType::Aggregate => "count-task",
            TaskType::Pairwise => "pairs-task",
            TaskType::Summarise => "summarise-task",
            TaskType::MultiHop => "hops-task",
        }
    }

    pub fn from_marker(token: &str) -> Option<TaskType> {
        TaskType::ALL.iter().copied().find(|t| t.marker() == token)
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fixed two-token instruction prepended to every leaf sub-prompt.
pub fn leaf_header(task: TaskType) -> [&'static str; 2] {
    match task {
        TaskType::Search => ["find", "needle:"],
        TaskType::Classify => ["classify", "items:"],
        TaskType::Aggregate => ["count", "categories:"],
        TaskType::Pairwise => ["label", "items:"],
        TaskType::Summarise => ["summarise", "text:"],
        TaskType::MultiHop => ["extract", "facts:"],
    }
}

/// Token cost of a leaf header; identical for every task.
pub const LEAF_HEADER_LEN: usize = 2;

/// Tokens of the task-detection prompt besides the preview:
/// `select task type: len <n>`.
pub const DETECT_OVERHEAD: usize = 5;

/// How many tokens of the prompt the detection phase may inspect.
pub const DETECT_PREVIEW: usize = 500;

pub const DETECT_HEADER: [&str; 3] = ["select", "task", "type:"];

/// Header of a neural composition call over partial results.
pub const COMPOSE_HEADER: [&str; 2] = ["combine", "parts:"];

/// Header of the one synthesis call closing a multi-hop run.
pub const SYNTH_HEADER: [&str; 2] = ["answer", "query:"];

/// Separates the query from the evidence in a synthesis prompt.
pub const EVIDENCE_MARKER: &str = "evidence:";

/// Leaf answer when a chunk holds nothing relevant.
pub const NO_FINDING: &str = "none";

/// Instruction words queries use; carrying no content, they are excluded
/// from pruning keywords.
const QUERY_STOPWORDS: [&str; 7] = [
    "find",
    "which",
    "category",
    "least-common",
    "same-label",
    "pairs",
    "target-for",
];

/// The content-bearing tokens of a query: everything that is neither a task
/// marker nor an instruction word. These drive preview-based pruning.
pub fn content_keywords(query: &Document) -> Vec<String> {
    query
        .tokens()
        .filter(|t| TaskType::from_marker(t).is_none())
        .filter(|t| !QUERY_STOPWORDS.contains(t))
        .map(str::to_owned)
        .collect()
}

pub fn detect_prompt(preview: &Document, total_len: usize) -> Document {
    let mut tokens: Vec<String> = DETECT_HEADER.iter().map(|s| s.to_string()).collect();
    tokens.push("len".into());
    tokens.push(total_len.to_string());
    Document::concat(&[Document::from_tokens(tokens), preview.clone()])
}

pub fn header_doc(tokens: &[&str]) -> Document {
    Document::from_tokens(tokens.iter().map(|s| s.to_string()).collect())
}

/// Which header a prompt starts with, if any. Lets a backend dispatch on the
/// kind of work being requested without any side channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Detect,
    Leaf(TaskType),
    Compose,
    Synth,
}

pub fn classify_prompt(prompt: &Document) -> Option<PromptKind> {
    let first: Vec<&str> = prompt.tokens().take(3).collect();
    if first.len() >= 3 && first[..3] == DETECT_HEADER[..] {
        return Some(PromptKind::Detect);
    }
    if first.len() >= 2 {
        let two = [first[0], first[1]];
        if two == COMPOSE_HEADER {
            return Some(PromptKind::Compose);
        }
        if two == SYNTH_HEADER {
            return Some(PromptKind::Synth);
        }
        for task in TaskType::ALL {
            if two == leaf_header(task) {
                return Some(PromptKind::Leaf(task));
            }
        }
    }
    None
}

/// Per-category counts encoded as `<category>:<count>` tokens, sorted by
/// category so rendering is canonical.
pub fn render_counts(counts: &BTreeMap<String, u64>) -> Document {
    Document::from_tokens(
        counts
            .iter()
            .map(|(cat, n)| format!("{cat}:{n}"))
            .collect(),
    )
}

/// Parses `<category>:<count>` tokens; malformed tokens are skipped.
pub fn parse_counts(doc: &Document) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for tok in doc.tokens() {
        if let Some((cat, count)) = tok.rsplit_once(':') {
            if let Ok(n) = count.parse::<u64>() {
                if !cat.is_empty() {
                    *out.entry(cat.to_string()).or_insert(0) += n;
                }
            }
        }
    }
    out
}

/// Adds `rhs` into `lhs`, key-wise; missing keys count as zero.
pub fn merge_counts(lhs: &mut BTreeMap<String, u64>, rhs: &BTreeMap<String, u64>) {
    for (cat, n) in rhs {
        *lhs.entry(cat.clone()).or_insert(0) += n;
    }
}

pub fn render_label_records(records: &[(u64, String)]) -> Document {
    Document::from_tokens(
        records
            .iter()
            .map(|(id, label)| format!("{id}:{label}"))
            .collect(),
    )
}

/// Parses `<id>:<label>` records; returns the well-formed ones plus how many
/// tokens were malformed (those count as leaf errors, not crashes).
pub fn parse_label_records(doc: &Document) -> (Vec<(u64, String)>, usize) {
    let mut records = Vec::new();
    let mut malformed = 0;
    for tok in doc.tokens() {
        match tok.split_once(':') {
            Some((id, label)) if !label.is_empty() => match id.parse::<u64>() {
                Ok(id) => records.push((id, label.to_string())),
                Err(_) => malformed += 1,
            },
            _ => malformed += 1,
        }
    }
    (records, malformed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_round_trip() {
        let mut counts = BTreeMap::new();
        counts.insert("desc".to_string(), 45);
        counts.insert("num".to_string(), 52);
        let doc = render_counts(&counts);
        assert_eq!(doc.to_text(), "desc:45 num:52");
        assert_eq!(parse_counts(&doc), counts);
    }

    #[test]
    fn parse_counts_skips_malformed() {
        let doc = Document::from_text("desc:45 bogus nope: :7 num:9");
        let counts = parse_counts(&doc);
        assert_eq!(counts.len(), 2);
        assert_eq!(counts["desc"], 45);
        assert_eq!(counts["num"], 9);
    }

    #[test]
    fn merge_counts_treats_missing_as_zero() {
        let mut a = parse_counts(&Document::from_text("desc:45"));
        let b = parse_counts(&Document::from_text("desc:33 num:10"));
        merge_counts(&mut a, &b);
        assert_eq!(a["desc"], 78);
        assert_eq!(a["num"], 10);
    }

    #[test]
    fn label_records_report_malformed() {
        let doc = Document::from_text("1:A 2:B broken 3: x:C");
        let (records, malformed) = parse_label_records(&doc);
        assert_eq!(records, vec![(1, "A".into()), (2, "B".into())]);
        assert_eq!(malformed, 3);
    }

    #[test]
    fn prompt_classification() {
        let chunk = Document::from_text("a b c");
        let leaf = Document::concat(&[
            header_doc(&leaf_header(TaskType::Aggregate)),
            chunk.clone(),
        ]);
        assert_eq!(
            classify_prompt(&leaf),
            Some(PromptKind::Leaf(TaskType::Aggregate))
        );
        let detect = detect_prompt(&chunk, 3);
        assert_eq!(classify_prompt(&detect), Some(PromptKind::Detect));
        assert_eq!(classify_prompt(&chunk), None);
    }

    #[test]
    fn task_names_and_markers_are_bijective() {
        for task in TaskType::ALL {
            assert_eq!(TaskType::from_name(task.name()), Some(task));
            assert_eq!(TaskType::from_marker(task.marker()), Some(task));
        }
        assert_eq!(TaskType::from_name("multi_hop"), Some(TaskType::MultiHop));
        assert_eq!(TaskType::from_name("bogus"), None);
    }
}
