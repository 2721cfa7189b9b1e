//! Acceptance suite: one test per verified guarantee, each printing one
//! pass/fail line per check (run with `--nocapture` to see them). Every
//! tolerance is pinned here, not calibrated later.
//!
//! Budgets: the call-count suite covers 200 seeded configurations, the cost
//! suite 1,000, the optimal-partition sweep 50 profiles, the pairwise suite
//! 100 instances, and the scaling suite 10,000 trials per grid point.

use lambda_rlm::verify::{
    verify_appendix_trace, verify_cost, verify_determinism, verify_lambda, verify_multihop,
    verify_optimal_k, verify_pairwise, verify_scaling, verify_termination, SuiteReport,
};

fn assert_suite(report: SuiteReport) {
    print!("{}", report.render());
    assert!(report.passed(), "suite failed:\n{}", report.render());
}

#[test]
fn exact_call_count_zero_tolerance() {
    assert_suite(verify_termination(0xA1));
}

#[test]
fn cost_bound_and_recurrence_equality() {
    assert_suite(verify_cost(0xA2));
}

#[test]
fn appendix_a_worked_trace_reproduction() {
    assert_suite(verify_appendix_trace());
}

#[test]
fn optimal_partition_sweeps_bottom_at_two() {
    assert_suite(verify_optimal_k(0xA4));
}

#[test]
fn scaling_laws_at_ten_thousand_trials() {
    assert_suite(verify_scaling(10_000, 0xA5));
}

#[test]
fn lambda_calculus_worked_examples() {
    assert_suite(verify_lambda());
}

#[test]
fn pairwise_linear_neural_quadratic_symbolic() {
    assert_suite(verify_pairwise(0xA7));
}

#[test]
fn multihop_retained_plus_one_calls() {
    assert_suite(verify_multihop(0xA8));
}

#[test]
fn deterministic_traces_byte_identical() {
    assert_suite(verify_determinism(0xA9));
}
