//! End-to-end behavior of the simulate -> difference -> estimate pipeline.

use queue_infer::distributions::DiscretePmf;
use queue_infer::estimator::{difference_sequence, estimate, estimate_h, h_from_g};
use queue_infer::seeding::{mc_replicate_stream, seed_for};
use queue_infer::simulator::{
    discretize, simulate_continuous_trace, simulate_counts, ContinuousService, CountPaths,
    PathMeta, SimConfig,
};

fn poisson_geometric_path(seed: u64, n: usize) -> CountPaths {
    let arrival = DiscretePmf::poisson(1.0).unwrap();
    let service = DiscretePmf::geometric(0.5).unwrap();
    simulate_counts(&arrival, &service, &SimConfig { n, burn_in: None, seed }).unwrap()
}

#[test]
fn distance_distribution_estimate_tracks_closed_form() {
    let paths = poisson_geometric_path(2024, 200_000);
    let diffs = difference_sequence(&paths).unwrap();
    let h_hat = estimate_h(&paths, &diffs, 10).unwrap();
    let c = (-1.0f64).exp();
    let g_cdf: Vec<f64> = (1..=10).map(|x| 1.0 - 0.5f64.powi(x)).collect();
    let h_true = h_from_g(&g_cdf, c);
    for (x, (est, truth)) in h_hat.iter().zip(&h_true).enumerate() {
        assert!(
            (est - truth).abs() < 0.01,
            "h_hat({}) = {est} vs {truth}",
            x + 1
        );
    }
}

#[test]
fn sup_error_shrinks_along_nested_samples() {
    // Along nested prefixes of a single path the worst-case estimation
    // error over x <= 10 may rise at most once per seed.
    let sizes = [1_000usize, 10_000, 100_000, 200_000];
    let g_true: Vec<f64> = (1..=10).map(|x| 1.0 - 0.5f64.powi(x)).collect();
    for seed in [5u64, 6, 7] {
        let full = poisson_geometric_path(seed, *sizes.last().unwrap());
        let mut sups = Vec::new();
        for &n in &sizes {
            let prefix = CountPaths::new(
                full.arrivals[..n].to_vec(),
                full.departures[..n].to_vec(),
                PathMeta::default(),
            )
            .unwrap();
            let est = estimate(&prefix, 10).unwrap();
            let sup = est
                .g_raw
                .iter()
                .zip(&g_true)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            sups.push(sup);
        }
        let violations = sups.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(
            violations <= 1,
            "seed {seed}: sup errors not nearly monotone: {sups:?}"
        );
    }
}

#[test]
fn simulate_then_estimate_is_deterministic() {
    let a = estimate(&poisson_geometric_path(9, 50_000), 8).unwrap();
    let b = estimate(&poisson_geometric_path(9, 50_000), 8).unwrap();
    assert_eq!(a, b);
}

#[test]
fn discretized_slot_aligned_service_is_recovered_exactly() {
    // A deterministic service of exactly four slots survives binning with
    // no distortion: departure bin minus arrival bin is always 4, so the
    // estimate converges to the step law.
    let h = 0.1;
    let svc = ContinuousService::Deterministic { duration: 0.4 };
    let trace = simulate_continuous_trace(1.0, &svc, 100_000.0, 31).unwrap();
    let paths = discretize(&trace, h).unwrap();
    let est = estimate(&paths, 8).unwrap();
    for x in 1..=8usize {
        let truth = if x >= 4 { 1.0 } else { 0.0 };
        assert!(
            (est.g_mono[x - 1] - truth).abs() < 0.01,
            "g({x}) = {} vs {truth}",
            est.g_mono[x - 1]
        );
    }
    let c = (-h).exp();
    assert!((est.c_hat - c).abs() < 0.005);
}

#[test]
fn continuous_pipeline_matches_sub_slot_rounding_limit() {
    // With exponential services the raw binning shortens each service by
    // the arrival's sub-slot offset: the implied per-slot law is the
    // stochastic rounding of S/h, whose conditional-on-survival tail is
    // exactly exp(-h x). The estimator therefore converges to the scaled
    // curve (1 - e^-h)/h * (1 - e^-hx), which this test pins down.
    let h = 0.1f64;
    let svc = ContinuousService::Exponential { rate: 1.0 };
    let trace = simulate_continuous_trace(1.0, &svc, 200_000.0, 77).unwrap();
    let paths = discretize(&trace, h).unwrap();
    let est = estimate(&paths, 30).unwrap();
    let factor = (1.0 - (-h).exp()) / h;
    let mut sup = 0.0f64;
    for x in 1..=30usize {
        let limit = factor * (1.0 - (-h * x as f64).exp());
        sup = sup.max((est.g_raw[x - 1] - limit).abs());
    }
    assert!(sup < 0.02, "sup distance to the binned limit is {sup}");
}

#[test]
fn mc_replicate_seeds_are_stable() {
    // Pin the derivation so seeded experiment manifests stay replayable.
    let s0 = seed_for(1, mc_replicate_stream(0));
    let s1 = seed_for(1, mc_replicate_stream(1));
    assert_ne!(s0, s1);
    assert_eq!(s0, seed_for(1, mc_replicate_stream(0)));
}
