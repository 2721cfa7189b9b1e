//! The pre-verified combinator library and the recursive executor built
//! from it. Every operator here is total and deterministic; the oracle is
//! the only source of uncertainty in a run.

mod executor;
mod trace;

pub use executor::{
    execute_multihop, execute_pairwise, execute_phi, MultihopOutcome, PairwiseOutcome,
    RuntimeError, DEFAULT_PREVIEW_BUDGET,
};
pub use trace::{CallKind, CallRecord, ExecTrace, TraceFile};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answers::{header_doc, leaf_header, TaskType};
use crate::doc::{DocError, Document};
use crate::oracle::OracleProfile;

/// How partial results are combined at each recursion level. Deterministic
/// operators preserve a correct answer with probability 1 at zero oracle
/// cost; neural operators invoke the oracle exactly once per application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionOp {
    FilterBest,
    Concat,
    MergeCounts,
    CrossFilter,
    NeuralConcat,
    NeuralSynth,
}

impl CompositionOp {
    pub fn is_deterministic(self) -> bool {
        !matches!(self, CompositionOp::NeuralConcat | CompositionOp::NeuralSynth)
    }

    /// Probability the operator preserves a correct answer given correct
    /// inputs: 1 for deterministic operators, the profile's `A_oplus` for
    /// neural ones.
    pub fn preservation(self, profile: &OracleProfile) -> f64 {
        if self.is_deterministic() {
            1.0
        } else {
            profile.a_oplus
        }
    }

    /// Planner's per-level composition cost model `C_oplus(k) = c_oplus * k`;
    /// zero for deterministic operators.
    pub fn per_level_cost(self, k: usize, profile: &OracleProfile) -> f64 {
        if self.is_deterministic() {
            0.0
        } else {
            profile.c_oplus * k as f64
        }
    }
}

/// Stages a task pipeline is declared in terms of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Split,
    SplitDelta,
    Peek,
    Filter,
    MapOracle,
    MapPeek,
    Parse,
    Cross,
    Concat,
    Merge,
    Best,
    Synth,
}

pub type PipelineSpec = Vec<Stage>;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("reduce over empty input")]
pub struct EmptyReduce;

/// Partition a document into `k` contiguous chunks.
pub fn split(doc: &Document, k: usize) -> Result<Vec<Document>, DocError> {
    doc.split(k)
}

/// Extract the token range `[start, end)`.
pub fn peek(doc: &Document, start: usize, end: usize) -> Result<Document, DocError> {
    doc.peek(start, end)
}

/// Apply a function to every element of a list.
pub fn map_op<A, B>(mut f: impl FnMut(&A) -> B, xs: &[A]) -> Vec<B> {
    xs.iter().map(|x| f(x)).collect()
}

/// Retain elements satisfying a predicate.
pub fn filter_op<A: Clone>(mut pred: impl FnMut(&A) -> bool, xs: &[A]) -> Vec<A> {
    xs.iter().filter(|x| pred(x)).cloned().collect()
}

/// Fold a non-empty list into a single value, left to right in list order.
pub fn reduce_op<A: Clone>(
    mut op: impl FnMut(A, &A) -> A,
    xs: &[A],
) -> Result<A, EmptyReduce> {
    let (first, rest) = xs.split_first().ok_or(EmptyReduce)?;
    Ok(rest.iter().fold(first.clone(), |acc, x| op(acc, x)))
}

/// Join a list of documents into one.
pub fn concat_op(xs: &[Document]) -> Document {
    Document::concat(xs)
}

/// Cartesian product of two lists.
pub fn cross_op<A: Clone, B: Clone>(xs: &[A], ys: &[B]) -> Vec<(A, B)> {
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for x in xs {
        for y in ys {
            out.push((x.clone(), y.clone()));
        }
    }
    out
}

/// Formats a leaf sub-prompt: the task's fixed two-token instruction header
/// followed by the chunk. The header's token cost is charged to the call.
pub fn leaf_prompt(chunk: &Document, task: TaskType) -> Document {
    Document::concat(&[header_doc(&leaf_header(task)), chunk.clone()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answers::LEAF_HEADER_LEN;

    fn doc(n: usize) -> Document {
        Document::from_tokens((0..n).map(|i| format!("t{i}")).collect())
    }

    #[test]
    fn concat_inverts_split() {
        let d = doc(57);
        for k in [1, 2, 5, 9] {
            assert_eq!(concat_op(&split(&d, k).unwrap()), d);
        }
    }

    #[test]
    fn cross_orders_first_list_outer() {
        let pairs = cross_op(&["a", "b"], &["c"]);
        assert_eq!(pairs, vec![("a", "c"), ("b", "c")]);
        assert_eq!(cross_op::<&str, u8>(&[], &[1]), vec![]);
    }

    #[test]
    fn reduce_folds_in_order() {
        let xs = ["a", "b", "c"].map(String::from);
        let joined = reduce_op(|acc: String, x: &String| acc + x, &xs).unwrap();
        assert_eq!(joined, "abc");
        let empty: Vec<i32> = Vec::new();
        assert_eq!(reduce_op(|acc, x| acc + *x, &empty), Err(EmptyReduce));
    }

    #[test]
    fn merge_counts_reduction() {
        use crate::answers::{parse_counts, render_counts};
        let a = Document::from_text("desc:45");
        let b = Document::from_text("desc:33");
        let merged = reduce_op(
            |acc: Document, x: &Document| {
                let mut counts = parse_counts(&acc);
                crate::answers::merge_counts(&mut counts, &parse_counts(x));
                render_counts(&counts)
            },
            &[a, b],
        )
        .unwrap();
        assert_eq!(merged.to_text(), "desc:78");
    }

    #[test]
    fn leaf_prompt_length_is_header_plus_chunk() {
        let chunk = doc(10);
        let prompt = leaf_prompt(&chunk, TaskType::Aggregate);
        assert_eq!(prompt.len(), LEAF_HEADER_LEN + chunk.len());
        assert_eq!(
            prompt.tokens().take(2).collect::<Vec<_>>(),
            vec!["count", "categories:"]
        );
    }

    #[test]
    fn composition_flags() {
        use CompositionOp::*;
        let profile = OracleProfile::appendix_a();
        for op in [FilterBest, Concat, MergeCounts, CrossFilter] {
            assert!(op.is_deterministic());
            assert_eq!(op.preservation(&profile), 1.0);
            assert_eq!(op.per_level_cost(5, &profile), 0.0);
        }
        for op in [NeuralConcat, NeuralSynth] {
            assert!(!op.is_deterministic());
            assert_eq!(op.preservation(&profile), profile.a_oplus);
            assert!(op.per_level_cost(5, &profile) > 0.0);
        }
    }
}
