//! Ground-truth backend: answers every prompt exactly by scanning it.
//! Separates runtime bugs from simulated noise — any end-to-end run over a
//! generated instance must score 1.0 through this backend.

use std::collections::BTreeMap;

use crate::answers::{
    classify_prompt, render_counts, PromptKind, TaskType, DETECT_OVERHEAD, EVIDENCE_MARKER,
    NO_FINDING,
};
use crate::doc::Document;

use super::{cost_of, Oracle, OracleCallRecord, OracleError, OracleProfile, OracleResponse};

pub struct SymbolicOracle {
    profile: OracleProfile,
}

impl SymbolicOracle {
    pub fn new(profile: OracleProfile) -> Self {
        SymbolicOracle { profile }
    }
}

impl Oracle for SymbolicOracle {
    fn profile(&self) -> &OracleProfile {
        &self.profile
    }

    fn backend_name(&self) -> &'static str {
        "symbolic"
    }

    fn call_extrapolated(
        &self,
        prompt: &Document,
        _call_index: u64,
    ) -> Result<OracleResponse, OracleError> {
        let answer = ground_truth_answer(prompt);
        let record = OracleCallRecord {
            input_tokens: prompt.len(),
            output_tokens: self.profile.n_out_bar,
            cost: cost_of(&self.profile, prompt.len()),
            was_correct: Some(true),
        };
        Ok(OracleResponse { answer, record })
    }
}

/// The exact answer to a formatted prompt. Shared by the stochastic backend,
/// which corrupts it with probability `1 - A(n)`.
pub fn ground_truth_answer(prompt: &Document) -> Document {
    match classify_prompt(prompt) {
        Some(PromptKind::Detect) => {
            let body = skip(prompt, DETECT_OVERHEAD);
            detect_answer(&body)
        }
        Some(PromptKind::Leaf(task)) => {
            let body = skip(prompt, 2);
            leaf_answer(task, &body)
        }
        Some(PromptKind::Compose) => {
            let body = skip(prompt, 2);
            digest(&body)
        }
        Some(PromptKind::Synth) => {
            let body = skip(prompt, 2);
            synth_answer(&body)
        }
        None => Document::from_text(NO_FINDING),
    }
}

fn skip(doc: &Document, n: usize) -> Document {
    doc.peek(n.min(doc.len()), doc.len()).expect("skip in range")
}

fn detect_answer(preview: &Document) -> Document {
    for tok in preview.tokens() {
        if let Some(task) = TaskType::from_marker(tok) {
            return Document::from_text(task.name());
        }
    }
    Document::from_text("unknown")
}

fn leaf_answer(task: TaskType, body: &Document) -> Document {
    match task {
        TaskType::Search => {
            for tok in body.tokens() {
                if let Some(rest) = tok.strip_prefix("needle:") {
                    if let Some((_key, value)) = rest.split_once('=') {
                        return Document::from_text(value);
                    }
                }
            }
            Document::from_text(NO_FINDING)
        }
        TaskType::Classify | TaskType::Pairwise => {
            let mut records = Vec::new();
            for tok in body.tokens() {
                if let Some(rest) = tok.strip_prefix("rec:") {
                    if let Some((id, label)) = rest.split_once(':') {
                        records.push(format!("{id}:{label}"));
                    }
                }
            }
            Document::from_tokens(records)
        }
        TaskType::Aggregate => {
            let mut counts: BTreeMap<String, u64> = BTreeMap::new();
            for tok in body.tokens() {
                if let Some(cat) = tok.strip_prefix("label:") {
                    *counts.entry(cat.to_string()).or_insert(0) += 1;
                }
            }
            render_counts(&counts)
        }
        TaskType::Summarise => digest(body),
        TaskType::MultiHop => {
            let facts: Vec<String> = body
                .tokens()
                .filter(|t| t.starts_with("fact:"))
                .map(str::to_owned)
                .collect();
            Document::from_tokens(facts)
        }
    }
}

fn digest(body: &Document) -> Document {
    if body.is_empty() {
        return Document::from_text(NO_FINDING);
    }
    body.peek(0, body.len().min(4)).expect("bounded peek")
}

/// Synthesis prompt body: `<query tokens> evidence: <fact tokens>`. Walks
/// the fact chain from the query's start entity and answers the entity it
/// ends on.
fn synth_answer(body: &Document) -> Document {
    let tokens: Vec<&str> = body.tokens().collect();
    let divider = tokens.iter().position(|t| *t == EVIDENCE_MARKER);
    let (query, evidence) = match divider {
        Some(at) => (&tokens[..at], &tokens[at + 1..]),
        None => (&tokens[..], &tokens[..0]),
    };
    let start = query
        .iter()
        .position(|t| *t == "target-for")
        .and_then(|at| query.get(at + 1).copied());
    let Some(start) = start else {
        return Document::from_text(NO_FINDING);
    };
    let edges: Vec<(&str, &str)> = evidence
        .iter()
        .filter_map(|t| t.strip_prefix("fact:"))
        .filter_map(|rest| rest.split_once("->"))
        .collect();
    let mut current = start;
    let mut hops = 0;
    while hops <= edges.len() {
        match edges.iter().find(|(src, _)| *src == current) {
            Some((_, dst)) => {
                current = dst;
                hops += 1;
            }
            None => break,
        }
    }
    if hops == 0 {
        return Document::from_text(NO_FINDING);
    }
    Document::from_text(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answers::{header_doc, leaf_header, parse_counts, SYNTH_HEADER};

    fn leaf_prompt(task: TaskType, body: &str) -> Document {
        Document::concat(&[header_doc(&leaf_header(task)), Document::from_text(body)])
    }

    #[test]
    fn aggregate_leaf_counts_exactly() {
        let prompt = leaf_prompt(
            TaskType::Aggregate,
            "q1 label:desc x y q2 label:num z label:desc",
        );
        let answer = ground_truth_answer(&prompt);
        assert_eq!(answer.to_text(), "desc:2 num:1");
        assert_eq!(parse_counts(&answer).len(), 2);
    }

    #[test]
    fn search_leaf_finds_needle_or_reports_none() {
        let hit = leaf_prompt(TaskType::Search, "a b needle:key-7=val-99 c");
        assert_eq!(ground_truth_answer(&hit).to_text(), "val-99");
        let miss = leaf_prompt(TaskType::Search, "a b c");
        assert_eq!(ground_truth_answer(&miss).to_text(), NO_FINDING);
    }

    #[test]
    fn pairwise_leaf_emits_records() {
        let prompt = leaf_prompt(TaskType::Pairwise, "rec:1:A pad rec:2:B rec:3:A");
        assert_eq!(ground_truth_answer(&prompt).to_text(), "1:A 2:B 3:A");
    }

    #[test]
    fn synthesis_walks_fact_chain() {
        let body = Document::from_text(
            "hops-task topic:t1 find target-for alpha7 evidence: fact:alpha7->beta7 fact:beta7->gamma7 fact:zeta1->eta1",
        );
        let prompt = Document::concat(&[header_doc(&SYNTH_HEADER), body]);
        assert_eq!(ground_truth_answer(&prompt).to_text(), "gamma7");
    }

    #[test]
    fn synthesis_on_empty_evidence_reports_none() {
        let body = Document::from_text("hops-task topic:t1 find target-for alpha7 evidence:");
        let prompt = Document::concat(&[header_doc(&SYNTH_HEADER), body]);
        assert_eq!(ground_truth_answer(&prompt).to_text(), NO_FINDING);
    }

    #[test]
    fn window_is_enforced() {
        let profile = OracleProfile {
            context_window: 8,
            ..OracleProfile::appendix_a()
        };
        let oracle = SymbolicOracle::new(profile);
        let ok = leaf_prompt(TaskType::Aggregate, "a b c d e f");
        assert!(oracle.call(&ok, 0).is_ok());
        let over = leaf_prompt(TaskType::Aggregate, "a b c d e f g");
        match oracle.call(&over, 0) {
            Err(OracleError::ContextOverflow { len, window }) => {
                assert_eq!((len, window), (9, 8));
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn detection_keys_on_marker() {
        let preview = Document::from_text("count-task which category is least-common q1 label:desc");
        let prompt = crate::answers::detect_prompt(&preview, 131_000);
        assert_eq!(ground_truth_answer(&prompt).to_text(), "aggregate");
        let unmarked = crate::answers::detect_prompt(&Document::from_text("plain filler"), 10);
        assert_eq!(ground_truth_answer(&unmarked).to_text(), "unknown");
    }
}
