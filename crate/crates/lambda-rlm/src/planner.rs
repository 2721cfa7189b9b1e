//! Deterministic planning: task detection, plan lookup, selection of
//! `(k*, tau*, d)`, and pre-execution cost/accuracy estimates. Everything
//! except the single detection call is pure arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::answers::{detect_prompt, TaskType, DETECT_OVERHEAD, DETECT_PREVIEW, LEAF_HEADER_LEN};
use crate::doc::{split_sizes, Document};
use crate::oracle::{accuracy_at, cost_of, Oracle, OracleProfile};
use crate::runtime::{CallKind, CompositionOp, ExecTrace, PipelineSpec, RuntimeError, Stage};

/// How the branching factor is chosen when the prompt exceeds the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `k* = ceil(sqrt(n * c_in / c_oplus))`, then grown while the
    /// accuracy constraint `A(K)^d * A_oplus^d >= alpha` is unmet.
    AppendixSqrt,
    /// The cost-minimizing constant `k* = 2`.
    TheoremK2,
    /// A caller-chosen branching factor, for ablations.
    Fixed(usize),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::AppendixSqrt => write!(f, "appendix_sqrt"),
            Strategy::TheoremK2 => write!(f, "theorem_k2"),
            Strategy::Fixed(k) => write!(f, "fixed:{k}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "appendix_sqrt" => Ok(Strategy::AppendixSqrt),
            "theorem_k2" => Ok(Strategy::TheoremK2),
            other => match other.strip_prefix("fixed:").map(str::parse) {
                Some(Ok(k)) => Ok(Strategy::Fixed(k)),
                _ => Err(format!(
                    "unknown strategy `{other}` (expected appendix_sqrt, theorem_k2, or fixed:<k>)"
                )),
            },
        }
    }
}

pub const DEFAULT_ACCURACY_TARGET: f64 = 0.80;

/// A fully determined execution plan. Nothing about a run's shape is decided
/// after this is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub task: TaskType,
    pub compose: CompositionOp,
    pub pipeline: PipelineSpec,
    pub k_star: usize,
    pub tau_star: usize,
    /// Recursion depth bound `ceil(log_{k*}(n / tau*))`; governs the
    /// executor's guarantees and every estimate.
    pub depth: u32,
    /// The same quantity computed against the window instead of the leaf
    /// threshold, `ceil(log_{k*}(n / K))`, reported alongside because the
    /// planning algorithm is stated in that form.
    pub depth_algorithm: u32,
    pub strategy: Strategy,
    /// False when the accuracy-constraint loop exhausted its guard without
    /// meeting the target; the plan still executes.
    pub accuracy_feasible: bool,
    /// Query keywords driving preview-based pruning; empty disables it even
    /// when the pipeline carries a Filter stage.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filter_keywords: Vec<String>,
}

impl Plan {
    /// A plan with explicitly chosen decomposition parameters, bypassing the
    /// strategy machinery. Depths are derived from the given values.
    pub fn manual(task: TaskType, k_star: usize, tau_star: usize, n: usize) -> Plan {
        let (compose, pipeline) = lookup_plan(task);
        let depth = if k_star >= 2 {
            ceil_log_ratio(k_star, n, tau_star)
        } else {
            0
        };
        Plan {
            task,
            compose,
            pipeline,
            k_star,
            tau_star,
            depth,
            depth_algorithm: depth,
            strategy: Strategy::Fixed(k_star),
            accuracy_feasible: true,
            filter_keywords: Vec::new(),
        }
    }

    pub fn with_filter_keywords(mut self, keywords: Vec<String>) -> Plan {
        self.filter_keywords = keywords;
        self
    }

    pub fn validate(&self, profile: &OracleProfile) -> Result<(), RuntimeError> {
        if self.k_star < 1 {
            return Err(RuntimeError::PlanInvalid("k_star must be >= 1".into()));
        }
        if self.tau_star < 1 {
            return Err(RuntimeError::PlanInvalid("tau_star must be >= 1".into()));
        }
        if self.tau_star > profile.context_window {
            return Err(RuntimeError::PlanInvalid(format!(
                "tau_star {} exceeds context window {}",
                self.tau_star, profile.context_window
            )));
        }
        Ok(())
    }
}

/// Smallest `d >= 0` with `k^d * den >= num` — that is,
/// `ceil(log_k(num / den))` — computed exactly in integers.
pub fn ceil_log_ratio(k: usize, num: usize, den: usize) -> u32 {
    assert!(k >= 2, "ceil_log_ratio requires k >= 2");
    assert!(den >= 1, "ceil_log_ratio requires den >= 1");
    let mut d = 0;
    let mut reach = den as u128;
    while reach < num as u128 {
        reach = reach.saturating_mul(k as u128);
        d += 1;
    }
    d
}

/// The Panel-B row for a task: its composition operator and pipeline.
pub fn lookup_plan(task: TaskType) -> (CompositionOp, PipelineSpec) {
    use Stage::*;
    match task {
        TaskType::Search => (
            CompositionOp::FilterBest,
            vec![Split, MapPeek, Filter, MapOracle, Best],
        ),
        TaskType::Classify => (CompositionOp::Concat, vec![Split, MapOracle, Concat]),
        TaskType::Aggregate => (CompositionOp::MergeCounts, vec![Split, MapOracle, Merge]),
        TaskType::Pairwise => (
            CompositionOp::CrossFilter,
            vec![Split, MapOracle, Parse, Filter, Cross],
        ),
        TaskType::Summarise => (
            CompositionOp::NeuralConcat,
            vec![Split, MapOracle, Concat, Synth],
        ),
        TaskType::MultiHop => (
            CompositionOp::NeuralSynth,
            vec![SplitDelta, MapPeek, Filter, MapOracle, Synth],
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanParams {
    pub k_star: usize,
    pub tau_star: usize,
    pub depth: u32,
    pub depth_algorithm: u32,
    pub feasible: bool,
}

/// Chooses `(k*, tau*, d)` for an `n`-token prompt. Below the window the
/// answer is always `(1, n, 0)`; above it the strategy picks `k*`, the
/// accuracy constraint may grow it, and `tau* = min(K, floor(n/k*))`,
/// shaved by the fixed leaf-header length when it would touch the window.
pub fn plan_parameters(
    n: usize,
    profile: &OracleProfile,
    alpha: f64,
    strategy: Strategy,
) -> PlanParams {
    assert!(n >= 1, "plan_parameters requires n >= 1");
    let window = profile.context_window;
    if n <= window {
        return PlanParams {
            k_star: 1,
            tau_star: n,
            depth: 0,
            depth_algorithm: 0,
            feasible: true,
        };
    }

    // the square-root rule is undefined at zero composition price; fall
    // back to the constant-k strategy outright
    let strategy = match strategy {
        Strategy::AppendixSqrt if profile.c_oplus == 0.0 => Strategy::TheoremK2,
        other => other,
    };
    let mut k = match strategy {
        Strategy::TheoremK2 => 2,
        Strategy::Fixed(k) => k.max(2),
        Strategy::AppendixSqrt => {
            let raw = (n as f64 * profile.c_in / profile.c_oplus).sqrt().ceil();
            (raw as usize).max(2)
        }
    };
    k = k.min(n);

    let mut feasible = true;
    if strategy == Strategy::AppendixSqrt {
        let level_preservation = accuracy_at(profile, window) * profile.a_oplus;
        let met = |k: usize| {
            let d = ceil_log_ratio(k, n, window);
            level_preservation.powi(d as i32) >= alpha
        };
        // guard: k* < n / K, exactly
        while !met(k) && (k as u128) * (window as u128) < n as u128 {
            k += 1;
        }
        feasible = met(k);
    }

    let mut tau = window.min(n / k).max(1);
    // reserve room for the leaf instruction header; without this a full
    // leaf's formatted prompt would exceed the window
    if tau + LEAF_HEADER_LEN > window {
        tau = window.saturating_sub(LEAF_HEADER_LEN).max(1);
    }

    PlanParams {
        k_star: k,
        tau_star: tau,
        depth: ceil_log_ratio(k, n, tau),
        depth_algorithm: ceil_log_ratio(k, n, window),
        feasible,
    }
}

/// Builds the full plan for a detected task.
pub fn make_plan(
    task: TaskType,
    n: usize,
    profile: &OracleProfile,
    alpha: f64,
    strategy: Strategy,
) -> Plan {
    let (compose, pipeline) = lookup_plan(task);
    let params = plan_parameters(n, profile, alpha, strategy);
    Plan {
        task,
        compose,
        pipeline,
        k_star: params.k_star,
        tau_star: params.tau_star,
        depth: params.depth,
        depth_algorithm: params.depth_algorithm,
        strategy,
        accuracy_feasible: params.feasible,
        filter_keywords: Vec::new(),
    }
}

/// Exact leaf count of the recursion tree the executor will walk: chunk
/// sizes follow the ceiling split rule, empty chunks make no call.
pub fn phi_tree_leaves(n: usize, k: usize, tau: usize) -> u64 {
    if n == 0 {
        return 0;
    }
    if n <= tau || k < 2 {
        return 1;
    }
    split_sizes(n, k)
        .expect("k >= 2")
        .into_iter()
        .map(|size| phi_tree_leaves(size, k, tau))
        .sum()
}

/// The executor splits pairwise prompts flat into chunks no larger than
/// this, so each formatted leaf fits the window.
pub fn pairwise_chunk_budget(tau_star: usize, profile: &OracleProfile) -> usize {
    tau_star
        .min(profile.context_window.saturating_sub(LEAF_HEADER_LEN))
        .max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostEstimate {
    /// Closed-form pre-execution bound on the run's cost, leaf formatting
    /// and detection overhead included.
    pub total: f64,
    /// Exact number of leaf oracle calls the executor will make.
    pub leaf_calls: u64,
    pub detection_calls: u64,
    /// Planner's model of composition spend, `d * C_oplus(k*)`; zero for
    /// symbolic composition.
    pub composition_cost: f64,
    /// Predicted total M invocations: `leaf_calls + detection_calls`.
    pub predicted_calls: u64,
}

/// Pre-execution cost estimate: zero oracle calls, computable from the plan
/// alone. For plans with symbolic composition and no pruning, `total` is an
/// upper bound on the measured cost and `predicted_calls` is exact.
pub fn estimate_cost(plan: &Plan, n: usize, profile: &OracleProfile) -> CostEstimate {
    let detect_cost = cost_of(profile, n.min(DETECT_PREVIEW) + DETECT_OVERHEAD);
    let (leaf_calls, leaf_term) = match plan.task {
        TaskType::Pairwise => {
            let budget = pairwise_chunk_budget(plan.tau_star, profile);
            let calls = n.div_ceil(budget) as u64;
            let per_call = cost_of(profile, budget + LEAF_HEADER_LEN);
            (calls, calls as f64 * per_call)
        }
        _ => {
            let calls = phi_tree_leaves(n, plan.k_star, plan.tau_star);
            let bound_calls = (plan.k_star as f64).powi(plan.depth as i32);
            let per_call = cost_of(profile, plan.tau_star + LEAF_HEADER_LEN);
            (calls, bound_calls * per_call)
        }
    };
    let composition_cost =
        plan.depth as f64 * plan.compose.per_level_cost(plan.k_star, profile);
    CostEstimate {
        total: leaf_term + composition_cost + detect_cost,
        leaf_calls,
        detection_calls: 1,
        composition_cost,
        predicted_calls: leaf_calls + 1,
    }
}

/// Pre-execution upper bound for a multi-hop run over a known corpus: every
/// document retained and read, plus one synthesis call and detection.
pub fn estimate_multihop_cost(
    corpus_sizes: &[usize],
    profile: &OracleProfile,
) -> CostEstimate {
    let window = profile.context_window;
    let detect_cost = cost_of(profile, DETECT_PREVIEW + DETECT_OVERHEAD);
    let read_cost: f64 = corpus_sizes
        .iter()
        .map(|size| cost_of(profile, (size + LEAF_HEADER_LEN).min(window)))
        .sum();
    let synth_cost = cost_of(profile, window);
    CostEstimate {
        total: read_cost + synth_cost + detect_cost,
        leaf_calls: corpus_sizes.len() as u64 + 1,
        detection_calls: 1,
        composition_cost: synth_cost,
        predicted_calls: corpus_sizes.len() as u64 + 2,
    }
}

/// Lower bound on end-to-end accuracy implied by the plan:
/// `A(tau*)` when the input fits or composition is lossless;
/// `A_oplus^d` under perfect leaves; otherwise
/// `A(tau*)^(n k*/tau*) * A_oplus^d`.
pub fn estimate_accuracy(plan: &Plan, n: usize, profile: &OracleProfile) -> f64 {
    let leaf_acc = accuracy_at(profile, plan.tau_star);
    let preservation = plan.compose.preservation(profile);
    if plan.depth == 0 {
        return leaf_acc;
    }
    if preservation >= 1.0 {
        return leaf_acc;
    }
    if leaf_acc >= 1.0 {
        return preservation.powi(plan.depth as i32);
    }
    let exponent = n as f64 * plan.k_star as f64 / plan.tau_star as f64;
    leaf_acc.powf(exponent) * preservation.powi(plan.depth as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub task: TaskType,
    /// False when the oracle answered off-menu and the default was taken.
    pub recognized: bool,
}

/// Phase-2 task detection: peeks the first 500 tokens, asks the oracle to
/// pick one of the six task names, and charges exactly one call. An
/// off-menu reply falls back to `aggregate` and flags the trace.
pub fn detect_task(
    doc: &Document,
    oracle: &dyn Oracle,
    trace: &mut ExecTrace,
) -> Result<Detection, RuntimeError> {
    let window = oracle.profile().context_window;
    let preview_len = DETECT_PREVIEW
        .min(doc.len())
        .min(window.saturating_sub(DETECT_OVERHEAD));
    let preview = doc.peek(0, preview_len)?;
    let prompt = detect_prompt(&preview, doc.len());
    let index = trace.next_index();
    let response = oracle
        .call(&prompt, index)
        .map_err(|source| RuntimeError::OracleFailed { index, source })?;
    trace.record(
        CallKind::Detect,
        0,
        oracle.backend_name(),
        &response.record,
        None,
    );
    let name = response.answer.to_text();
    match TaskType::from_name(&name) {
        Some(task) => Ok(Detection {
            task,
            recognized: true,
        }),
        None => {
            trace.event(format!(
                "unrecognized-task: {name:?}; defaulting to aggregate"
            ));
            Ok(Detection {
                task: TaskType::Aggregate,
                recognized: false,
            })
        }
    }
}
