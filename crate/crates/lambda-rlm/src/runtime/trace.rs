//! Per-run ledger of oracle calls. The trace is an ordered, append-only log
//! keyed by a pre-assigned call index, so a run's trace is identical no
//! matter how leaf calls were scheduled.

use serde::Serialize;

use crate::oracle::OracleCallRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Detect,
    Leaf,
    Compose,
    Extract,
    Synthesis,
    Direct,
}

#[derive(Debug, Clone, Serialize)]
pub struct CallRecord {
    pub index: u64,
    pub depth: u32,
    pub input_tokens: usize,
    pub cost: f64,
    pub backend: &'static str,
    pub kind: CallKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub was_correct: Option<bool>,
    /// Token range of the chunk inside the root document, when the call was
    /// made on a contiguous slice of it. Not serialized; used by the
    /// simulation suites to locate which leaf handled a given token.
    #[serde(skip)]
    pub doc_range: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExecTrace {
    pub calls: Vec<CallRecord>,
    pub oracle_calls: u64,
    pub max_depth: u32,
    pub accumulated_cost: f64,
    pub pruned_chunks: u64,
    pub events: Vec<String>,
}

impl ExecTrace {
    pub fn new() -> Self {
        ExecTrace::default()
    }

    /// The index the next oracle call must be tagged with.
    pub fn next_index(&self) -> u64 {
        self.calls.len() as u64
    }

    pub fn record(
        &mut self,
        kind: CallKind,
        depth: u32,
        backend: &'static str,
        oracle_record: &OracleCallRecord,
        doc_range: Option<(usize, usize)>,
    ) {
        let record = CallRecord {
            index: self.next_index(),
            depth,
            input_tokens: oracle_record.input_tokens,
            cost: oracle_record.cost,
            backend,
            kind,
            was_correct: oracle_record.was_correct,
            doc_range,
        };
        self.oracle_calls += 1;
        self.max_depth = self.max_depth.max(depth);
        self.accumulated_cost += record.cost;
        self.calls.push(record);
    }

    pub fn event(&mut self, message: impl Into<String>) {
        self.events.push(message.into());
    }

    /// Calls of one kind, in index order.
    pub fn calls_of(&self, kind: CallKind) -> impl Iterator<Item = &CallRecord> {
        self.calls.iter().filter(move |c| c.kind == kind)
    }
}

/// The serialized form of a run: stable field names, one JSON object per
/// run. `plan` is whatever plan representation the caller executed.
#[derive(Debug, Serialize)]
pub struct TraceFile<P: Serialize> {
    pub plan: P,
    pub calls: Vec<CallRecord>,
    pub oracle_calls: u64,
    pub max_depth: u32,
    pub accumulated_cost: f64,
    pub answer: String,
    pub pruned_chunks: u64,
    pub events: Vec<String>,
}

impl<P: Serialize> TraceFile<P> {
    pub fn new(plan: P, trace: &ExecTrace, answer: String) -> Self {
        TraceFile {
            plan,
            calls: trace.calls.clone(),
            oracle_calls: trace.oracle_calls,
            max_depth: trace.max_depth,
            accumulated_cost: trace.accumulated_cost,
            answer,
            pruned_chunks: trace.pruned_chunks,
            events: trace.events.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }
}
