//! Acceptance suite: every validation criterion at its preset
//! configuration and stated tolerance, one test and one printed
//! pass/fail line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines;
//! the per-test pass/fail of the harness mirrors them either way.

use queue_infer_cli::validate::{run_criterion, worker_pool, CriterionOutcome, DEFAULT_MASTER_SEED};

fn run(id: usize) -> CriterionOutcome {
    let outcome = worker_pool().install(|| run_criterion(id, DEFAULT_MASTER_SEED));
    println!("{}", outcome.line());
    outcome
}

#[test]
fn acceptance_1_exact_roundtrip() {
    let o = run(1);
    assert!(o.pass, "{}", o.line());
}

#[test]
fn acceptance_2_service_law_consistency() {
    let o = run(2);
    assert!(o.pass, "{}", o.line());
}

#[test]
fn acceptance_3_clt_scale() {
    let o = run(3);
    assert!(o.pass, "{}", o.line());
}

#[test]
fn acceptance_4_indicator_variance_identity() {
    let o = run(4);
    assert!(o.pass, "{}", o.line());
}

#[test]
fn acceptance_5_small_instance_covariance_oracle() {
    let o = run(5);
    assert!(o.pass, "{}", o.line());
}

#[test]
fn acceptance_6_bootstrap_coverage() {
    let o = run(6);
    assert!(o.pass, "{}", o.line());
}

#[test]
fn acceptance_7_discretization_fidelity() {
    let o = run(7);
    assert!(o.pass, "{}", o.line());
}

#[test]
fn acceptance_8_arrival_departure_mean_identity() {
    let o = run(8);
    assert!(o.pass, "{}", o.line());
}

#[test]
fn acceptance_9_block_resampling_expectation_identity() {
    let o = run(9);
    assert!(o.pass, "{}", o.line());
}
