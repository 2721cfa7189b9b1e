//! The recursive executor: solve small prompts with one bounded oracle
//! call, otherwise split, optionally prune, recurse, and compose. The
//! recursion is host-level but guarded by the plan's declared depth bound —
//! asserted, never trusted. Specialized flat pipelines handle pairwise and
//! multi-hop tasks, whose expensive phases are symbolic.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::answers::{
    header_doc, merge_counts, parse_counts, parse_label_records, render_counts, TaskType,
    COMPOSE_HEADER, EVIDENCE_MARKER, NO_FINDING, SYNTH_HEADER,
};
use crate::doc::{DocError, Document};
use crate::oracle::{Oracle, OracleError};
use crate::planner::{pairwise_chunk_budget, Plan};

use super::trace::{CallKind, ExecTrace};
use super::{concat_op, leaf_prompt, reduce_op, CompositionOp, Stage};

/// Preview length for corpus filtering in multi-hop search.
pub const DEFAULT_PREVIEW_BUDGET: usize = 500;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("invalid plan: {0}")]
    PlanInvalid(String),
    #[error(transparent)]
    Doc(#[from] DocError),
    #[error("oracle call {index} failed: {source}")]
    OracleFailed { index: u64, source: OracleError },
}

/// Runs the recursive combinator program for the plain divide-and-conquer
/// tasks (search, classify, aggregate, summarise). Every oracle call is
/// appended to `trace` with its pre-assigned index and depth.
pub fn execute_phi(
    doc: &Document,
    plan: &Plan,
    oracle: &dyn Oracle,
    trace: &mut ExecTrace,
) -> Result<Document, RuntimeError> {
    plan.validate(oracle.profile())?;
    match plan.task {
        TaskType::Pairwise => {
            return Err(RuntimeError::PlanInvalid(
                "pairwise plans run through execute_pairwise".into(),
            ));
        }
        TaskType::MultiHop => {
            return Err(RuntimeError::PlanInvalid(
                "multi_hop plans run through execute_multihop".into(),
            ));
        }
        _ => {}
    }
    if plan.k_star < 2 && doc.len() > plan.tau_star {
        return Err(RuntimeError::PlanInvalid(format!(
            "k_star = {} cannot decompose {} tokens above tau_star = {}",
            plan.k_star,
            doc.len(),
            plan.tau_star
        )));
    }
    let mut ctx = PhiCtx {
        plan,
        oracle,
        trace,
    };
    ctx.phi(doc, 0, 0)
}

struct PhiCtx<'a> {
    plan: &'a Plan,
    oracle: &'a dyn Oracle,
    trace: &'a mut ExecTrace,
}

impl PhiCtx<'_> {
    fn phi(&mut self, doc: &Document, offset: usize, depth: u32) -> Result<Document, RuntimeError> {
        if depth > self.plan.depth.saturating_add(2) {
            return Err(RuntimeError::PlanInvalid(format!(
                "recursion reached depth {depth}, beyond the declared ceiling {} + 2",
                self.plan.depth
            )));
        }
        if doc.is_empty() {
            self.trace.event(format!("empty-leaf depth={depth}"));
            return Ok(neutral_answer(self.plan.task));
        }
        if doc.len() <= self.plan.tau_star {
            return self.leaf_call(doc, offset, depth);
        }

        let chunks = doc.split(self.plan.k_star)?;
        let mut offsets = Vec::with_capacity(chunks.len());
        let mut cursor = offset;
        for chunk in &chunks {
            offsets.push(cursor);
            cursor += chunk.len();
        }

        let retained: Vec<usize> =
            if self.plan.pipeline.contains(&Stage::Filter) && !self.plan.filter_keywords.is_empty() {
                self.prune(&chunks, depth)
            } else {
                (0..chunks.len()).collect()
            };

        let mut answers = Vec::with_capacity(retained.len());
        for i in retained {
            answers.push(self.phi(&chunks[i], offsets[i], depth + 1)?);
        }
        self.compose(&answers, depth)
    }

    fn leaf_call(
        &mut self,
        doc: &Document,
        offset: usize,
        depth: u32,
    ) -> Result<Document, RuntimeError> {
        let window = self.oracle.profile().context_window;
        let mut prompt = leaf_prompt(doc, self.plan.task);
        if prompt.len() > window {
            // only reachable when tau_star sits within a header of the window
            self.trace.event(format!("leaf-header-dropped depth={depth}"));
            prompt = doc.clone();
        }
        let index = self.trace.next_index();
        let response = self
            .oracle
            .call(&prompt, index)
            .map_err(|source| RuntimeError::OracleFailed { index, source })?;
        self.trace.record(
            CallKind::Leaf,
            depth,
            self.oracle.backend_name(),
            &response.record,
            Some((offset, offset + doc.len())),
        );
        Ok(response.answer)
    }

    /// Preview-based pruning: keep chunks whose first `tau*/10` tokens share
    /// a keyword with the query. When nothing matches, the answer could sit
    /// anywhere, so all chunks are kept.
    fn prune(&mut self, chunks: &[Document], depth: u32) -> Vec<usize> {
        let budget = (self.plan.tau_star / 10).max(1);
        let relevant: Vec<usize> = chunks
            .iter()
            .enumerate()
            .filter(|(_, chunk)| {
                let preview = chunk
                    .peek(0, budget.min(chunk.len()))
                    .expect("preview within chunk");
                let hit = preview
                    .tokens()
                    .any(|t| self.plan.filter_keywords.iter().any(|k| k == t));
                hit
            })
            .map(|(i, _)| i)
            .collect();
        if relevant.is_empty() {
            self.trace.event(format!(
                "prune-no-match depth={depth}: keeping all {} chunks",
                chunks.len()
            ));
            return (0..chunks.len()).collect();
        }
        let dropped = (chunks.len() - relevant.len()) as u64;
        self.trace.pruned_chunks += dropped;
        self.trace.event(format!(
            "pruned depth={depth}: kept {}/{}",
            relevant.len(),
            chunks.len()
        ));
        relevant
    }

    fn compose(&mut self, answers: &[Document], depth: u32) -> Result<Document, RuntimeError> {
        match self.plan.compose {
            CompositionOp::MergeCounts => {
                let maps: Vec<BTreeMap<String, u64>> =
                    answers.iter().map(parse_counts).collect();
                let total = reduce_op(
                    |mut acc, m: &BTreeMap<String, u64>| {
                        merge_counts(&mut acc, m);
                        acc
                    },
                    &maps,
                )
                .map_err(|_| RuntimeError::PlanInvalid("reduce over zero chunks".into()))?;
                Ok(render_counts(&total))
            }
            CompositionOp::Concat => Ok(concat_op(answers)),
            CompositionOp::FilterBest => Ok(answers
                .iter()
                .find(|a| !a.is_empty() && a.to_text() != NO_FINDING)
                .cloned()
                .unwrap_or_else(|| Document::from_text(NO_FINDING))),
            CompositionOp::CrossFilter => Err(RuntimeError::PlanInvalid(
                "cross-filter composition belongs to the pairwise pipeline".into(),
            )),
            CompositionOp::NeuralConcat | CompositionOp::NeuralSynth => {
                self.neural_compose(answers, depth)
            }
        }
    }

    /// Neural composition invokes the oracle exactly once per application.
    fn neural_compose(
        &mut self,
        answers: &[Document],
        depth: u32,
    ) -> Result<Document, RuntimeError> {
        let window = self.oracle.profile().context_window;
        let mut prompt = Document::concat(&[header_doc(&COMPOSE_HEADER), concat_op(answers)]);
        if prompt.len() > window {
            self.trace
                .event(format!("compose-input-truncated depth={depth}"));
            prompt = prompt.peek(0, window)?;
        }
        let index = self.trace.next_index();
        let response = self
            .oracle
            .call(&prompt, index)
            .map_err(|source| RuntimeError::OracleFailed { index, source })?;
        self.trace.record(
            CallKind::Compose,
            depth,
            self.oracle.backend_name(),
            &response.record,
            None,
        );
        Ok(response.answer)
    }
}

fn neutral_answer(task: TaskType) -> Document {
    match task {
        TaskType::Search => Document::from_text(NO_FINDING),
        // empty counts / no labels / empty string
        _ => Document::empty(),
    }
}

#[derive(Debug, Clone)]
pub struct PairwiseOutcome {
    pub pairs: BTreeSet<(u64, u64)>,
    /// Item labels as parsed from the concatenated leaf answers.
    pub labels: Vec<(u64, String)>,
    pub neural_calls: u64,
    pub parse_errors: usize,
}

/// Pairwise tasks: a linear neural labelling phase over `ceil(n / tau*)`
/// chunks, then the quadratic pair computation — purely symbolic, zero
/// oracle cost.
pub fn execute_pairwise(
    doc: &Document,
    pair_predicate: &dyn Fn(&str, &str) -> bool,
    plan: &Plan,
    oracle: &dyn Oracle,
    trace: &mut ExecTrace,
) -> Result<PairwiseOutcome, RuntimeError> {
    plan.validate(oracle.profile())?;
    if doc.is_empty() {
        return Ok(PairwiseOutcome {
            pairs: BTreeSet::new(),
            labels: Vec::new(),
            neural_calls: 0,
            parse_errors: 0,
        });
    }

    // Phase A: linear neural labelling
    let budget = pairwise_chunk_budget(plan.tau_star, oracle.profile());
    let k = doc.len().div_ceil(budget);
    let chunks = doc.split(k)?;
    let mut neural_calls = 0;
    let mut answer_docs = Vec::with_capacity(chunks.len());
    let mut cursor = 0;
    for chunk in &chunks {
        let offset = cursor;
        cursor += chunk.len();
        if chunk.is_empty() {
            continue;
        }
        let prompt = leaf_prompt(chunk, TaskType::Pairwise);
        let index = trace.next_index();
        let response = oracle
            .call(&prompt, index)
            .map_err(|source| RuntimeError::OracleFailed { index, source })?;
        trace.record(
            CallKind::Leaf,
            0,
            oracle.backend_name(),
            &response.record,
            Some((offset, offset + chunk.len())),
        );
        answer_docs.push(response.answer);
        neural_calls += 1;
    }
    let (labels, parse_errors) = parse_label_records(&concat_op(&answer_docs));
    if parse_errors > 0 {
        trace.event(format!("pairwise-parse-errors: {parse_errors}"));
    }

    // Phase B: quadratic symbolic pairing, free
    let mut pairs = BTreeSet::new();
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            let (id_a, label_a) = &labels[i];
            let (id_b, label_b) = &labels[j];
            if id_a != id_b && pair_predicate(label_a, label_b) {
                pairs.insert((*id_a.min(id_b), *id_a.max(id_b)));
            }
        }
    }
    trace.event(format!(
        "pairwise-symbolic: {} records -> {} pairs",
        labels.len(),
        pairs.len()
    ));
    Ok(PairwiseOutcome {
        pairs,
        labels,
        neural_calls,
        parse_errors,
    })
}

#[derive(Debug, Clone)]
pub struct MultihopOutcome {
    pub answer: Document,
    pub retained: usize,
    /// Set when no document passed the preview filter; synthesis still ran,
    /// over empty evidence.
    pub no_relevant: bool,
}

/// Multi-hop search over a corpus: symbolic preview filtering, neural
/// extraction over retained documents only, and exactly one synthesis call,
/// for `retained + 1` oracle calls total.
pub fn execute_multihop(
    corpus: &[Document],
    query: &Document,
    oracle: &dyn Oracle,
    preview_budget: usize,
    trace: &mut ExecTrace,
) -> Result<MultihopOutcome, RuntimeError> {
    if corpus.is_empty() {
        return Err(RuntimeError::PlanInvalid(
            "multi-hop search needs a nonempty corpus".into(),
        ));
    }
    let window = oracle.profile().context_window;
    let keywords: Vec<&str> = query.tokens().collect();

    // Phase A: mostly symbolic — preview each document, keep matches
    let retained_docs: Vec<&Document> = corpus
        .iter()
        .filter(|d| {
            let preview = d
                .peek(0, preview_budget.min(d.len()))
                .expect("preview within doc");
            let hit = preview.tokens().any(|t| keywords.contains(&t));
            hit
        })
        .collect();
    let no_relevant = retained_docs.is_empty();
    trace.event(format!(
        "multihop-retained: {}/{}",
        retained_docs.len(),
        corpus.len()
    ));
    if no_relevant {
        trace.event("no-relevant-documents: synthesizing over empty evidence");
    }

    // Phase B: neural read of the retained documents only
    let mut evidence = Vec::with_capacity(retained_docs.len());
    for doc in &retained_docs {
        let mut prompt = leaf_prompt(doc, TaskType::MultiHop);
        if prompt.len() > window {
            trace.event("extract-input-truncated");
            prompt = prompt.peek(0, window)?;
        }
        let index = trace.next_index();
        let response = oracle
            .call(&prompt, index)
            .map_err(|source| RuntimeError::OracleFailed { index, source })?;
        trace.record(
            CallKind::Extract,
            0,
            oracle.backend_name(),
            &response.record,
            None,
        );
        evidence.push(response.answer);
    }

    // Phase C: one synthesis call
    let mut prompt = Document::concat(&[
        header_doc(&SYNTH_HEADER),
        query.clone(),
        Document::from_text(EVIDENCE_MARKER),
        concat_op(&evidence),
    ]);
    if prompt.len() > window {
        trace.event("synthesis-input-truncated");
        prompt = prompt.peek(0, window)?;
    }
    let index = trace.next_index();
    let response = oracle
        .call(&prompt, index)
        .map_err(|source| RuntimeError::OracleFailed { index, source })?;
    trace.record(
        CallKind::Synthesis,
        0,
        oracle.backend_name(),
        &response.record,
        None,
    );

    Ok(MultihopOutcome {
        answer: response.answer,
        retained: retained_docs.len(),
        no_relevant,
    })
}
