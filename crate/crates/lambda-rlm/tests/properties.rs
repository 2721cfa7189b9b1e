//! Property tests for the crate's structural invariants: substitution
//! safety, printer/parser agreement, partition laws, plan validity, the
//! depth sandwich, and budget honesty of pre-execution estimates.

use std::collections::BTreeMap;

use proptest::prelude::*;

use lambda_rlm::answers::{parse_counts, render_counts, TaskType};
use lambda_rlm::doc::{split_sizes, Document};
use lambda_rlm::lambda::{
    alpha_eq, beta_step, free_vars, parse_expr, render, substitute, Expr, PrimOp,
};
use lambda_rlm::oracle::{OracleProfile, SymbolicOracle};
use lambda_rlm::planner::{estimate_cost, plan_parameters, Plan, Strategy as PlanStrategy};
use lambda_rlm::runtime::{execute_phi, ExecTrace};
use lambda_rlm::taskgen::gen_aggregate;
use lambda_rlm::verify::depth_sandwich_holds;

fn arb_name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c", "x", "y", "z"]).prop_map(str::to_string)
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        arb_name().prop_map(Expr::Var),
        (0i64..50).prop_map(Expr::Int),
    ];
    leaf.prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            (arb_name(), inner.clone()).prop_map(|(p, b)| Expr::Abs(p, Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(f, a)| Expr::app(f, a)),
            (
                prop::sample::select(vec![PrimOp::Add, PrimOp::Sub, PrimOp::Mul, PrimOp::Eq]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::prim(op, a, b)),
            (inner.clone(), inner.clone(), inner)
                .prop_map(|(c, t, e)| Expr::if_zero(c, t, e)),
        ]
    })
}

proptest! {
    /// Free variables after substitution stay within
    /// (FV(e) \ {x}) ∪ FV(a).
    #[test]
    fn substitution_is_safe(e in arb_expr(), x in arb_name(), a in arb_expr()) {
        let result = substitute(&e, &x, &a);
        let mut allowed = free_vars(&e);
        allowed.remove(&x);
        allowed.extend(free_vars(&a));
        let got = free_vars(&result);
        prop_assert!(
            got.is_subset(&allowed),
            "free vars {got:?} escaped {allowed:?} substituting {x} in {e}"
        );
    }

    /// Pretty-printing then re-parsing yields an alpha-equivalent term.
    #[test]
    fn printer_round_trips(e in arb_expr()) {
        let printed = render(&e);
        let reparsed = parse_expr(&printed)
            .map_err(|err| TestCaseError::fail(format!("{printed:?}: {err}")))?;
        prop_assert!(alpha_eq(&e, &reparsed), "{e:?} -> {printed:?} -> {reparsed:?}");
    }

    /// One-step reduction is a function: two evaluations agree exactly.
    #[test]
    fn one_step_reduction_is_deterministic(e in arb_expr()) {
        prop_assert_eq!(beta_step(&e), beta_step(&e));
    }

    /// Splitting yields ceiling-sized chunks that concatenate back to the
    /// original document, with empty chunks only when k exceeds n.
    #[test]
    fn split_concat_partition_laws(n in 0usize..500, k in 1usize..40) {
        let doc = Document::from_tokens((0..n).map(|i| format!("t{i}")).collect());
        let chunks = doc.split(k).unwrap();
        prop_assert_eq!(chunks.len(), k);
        let chunk_cap = n.div_ceil(k.max(1)).max(if n == 0 { 0 } else { 1 });
        for c in &chunks {
            prop_assert!(c.len() <= chunk_cap.max(1));
        }
        prop_assert_eq!(Document::concat(&chunks), doc);
        let sizes = split_sizes(n, k).unwrap();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        // zeros sit at the tail, and only when the ceiling-sized leading
        // chunks already exhaust the document
        let first_zero = sizes.iter().position(|s| *s == 0).unwrap_or(k);
        prop_assert!(sizes[first_zero..].iter().all(|s| *s == 0));
        if n > 0 && first_zero < k {
            prop_assert!((first_zero) * n.div_ceil(k) >= n);
        }
    }

    /// peek(peek(doc, a, b), 0, c) == peek(doc, a, a + c) for c <= b - a.
    #[test]
    fn peek_composes(n in 1usize..300, raw_a in 0usize..300, raw_b in 0usize..300, raw_c in 0usize..300) {
        let doc = Document::from_tokens((0..n).map(|i| format!("t{i}")).collect());
        let a = raw_a % (n + 1);
        let b = a + raw_b % (n - a + 1);
        let c = raw_c % (b - a + 1);
        let outer = doc.peek(a, b).unwrap();
        prop_assert_eq!(outer.peek(0, c).unwrap(), doc.peek(a, a + c).unwrap());
    }

    /// Count maps survive the answer-document encoding.
    #[test]
    fn counts_encoding_round_trips(entries in prop::collection::btree_map("[a-z]{1,8}", 0u64..10_000, 0..12)) {
        let counts: BTreeMap<String, u64> = entries;
        prop_assert_eq!(parse_counts(&render_counts(&counts)), counts);
    }

    /// Every planned decomposition satisfies the type invariants and the
    /// depth sandwich n/tau <= k^d <= n k / tau.
    #[test]
    fn plans_are_valid_and_sandwiched(
        n in 1usize..2_000_000,
        window in 64usize..100_000,
        strategy_pick in 0usize..3,
        alpha in 0.5f64..0.99,
    ) {
        let profile = OracleProfile {
            context_window: window,
            ..OracleProfile::appendix_a()
        };
        let strategy = [PlanStrategy::AppendixSqrt, PlanStrategy::TheoremK2, PlanStrategy::Fixed(7)][strategy_pick];
        let p = plan_parameters(n, &profile, alpha, strategy);
        prop_assert!(p.tau_star >= 1 && p.tau_star <= window);
        if n <= window {
            prop_assert_eq!((p.k_star, p.tau_star, p.depth), (1, n, 0));
        } else {
            prop_assert!(p.k_star >= 2);
            prop_assert!(depth_sandwich_holds(n, p.k_star, p.tau_star));
        }
    }

    /// For symbolic composition without pruning, the measured cost never
    /// exceeds the pre-execution estimate and the call count matches the
    /// prediction exactly, ragged splits included.
    #[test]
    fn estimates_are_honest_budgets(
        items in 10usize..220,
        k in 2usize..7,
        tau in 16usize..90,
        seed in 0u64..1_000,
    ) {
        let profile = OracleProfile {
            context_window: 1 << 30,
            c_oplus: 0.0,
            ..OracleProfile::appendix_a()
        };
        let oracle = SymbolicOracle::new(profile.clone());
        let instance = gen_aggregate((items * 5).max(16), 3, seed);
        let n = instance.doc.len();
        let plan = Plan::manual(TaskType::Aggregate, k, tau, n);
        let estimate = estimate_cost(&plan, n, &profile);
        let mut trace = ExecTrace::new();
        execute_phi(&instance.doc, &plan, &oracle, &mut trace).unwrap();
        prop_assert_eq!(trace.oracle_calls + 1, estimate.predicted_calls);
        let detect_cost = lambda_rlm::oracle::cost_of(&profile, n.min(500) + 5);
        prop_assert!(trace.accumulated_cost + detect_cost <= estimate.total + 1e-12);
        // window safety: every recorded call fits the window
        prop_assert!(trace.calls.iter().all(|c| c.input_tokens <= profile.context_window));
    }
}
