//! Preset Monte Carlo validation experiments.
//!
//! Each criterion is a self-contained seeded experiment with its own oracle
//! (closed forms, brute-force reimplementations or binomial noise bands)
//! and a wall-clock budget. The `mc-validate` command runs them all and
//! reports one pass/fail line per criterion; the acceptance test target
//! asserts them individually.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use queue_infer::asymptotics::{
    default_lag, indicator_long_run_cov, influence_series, long_run_cov, LagWeighting,
};
use queue_infer::bootstrap::{block_starts, coverage_single_rep, BlockRule};
use queue_infer::distributions::DiscretePmf;
use queue_infer::estimator::{
    difference_sequence, estimate, estimate_c, estimate_h, h_from_g,
};
use queue_infer::seeding::{mc_replicate_stream, rng_for, seed_for, STREAM_SIMULATION};
use queue_infer::simulator::{
    discretize, simulate_continuous_trace, simulate_counts, ContinuousService, CountPaths,
    PathMeta, SimConfig,
};
use queue_infer::stats::{ks_pvalue, ks_statistic, mean, normal_cdf, variance_population};

/// Default master seed of the validation presets.
pub const DEFAULT_MASTER_SEED: u64 = 1;

/// Outcome of one validation criterion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub details: String,
    pub elapsed_s: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {} ({}): {} [{:.1}s] {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.elapsed_s,
            self.details
        )
    }
}

pub const ALL_IDS: [usize; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

/// Run one criterion by id with its preset configuration.
pub fn run_criterion(id: usize, master_seed: u64) -> CriterionOutcome {
    run_criterion_with_opts(id, master_seed, None)
}

/// Run one criterion; `coverage_reps` overrides the repetition count of the
/// coverage experiment (criterion 6) for quick smoke runs.
pub fn run_criterion_with_opts(
    id: usize,
    master_seed: u64,
    coverage_reps: Option<usize>,
) -> CriterionOutcome {
    let start = Instant::now();
    let (name, budget_s, pass, details) = match id {
        1 => exact_roundtrip(master_seed),
        2 => consistency(master_seed),
        3 => clt_scale(master_seed),
        4 => kernel_identity(master_seed),
        5 => small_instance_oracle(master_seed),
        6 => bootstrap_coverage(master_seed, coverage_reps.unwrap_or(200).max(1)),
        7 => discretization_fidelity(master_seed),
        8 => wald_identity(master_seed),
        9 => mbb_expectation_identity(master_seed),
        other => panic!("unknown criterion id {other}"),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let within_budget = elapsed < budget_s;
    CriterionOutcome {
        id,
        name: name.to_string(),
        pass: pass && within_budget,
        details: if within_budget {
            details
        } else {
            format!("{details}; budget {budget_s}s exceeded")
        },
        elapsed_s: elapsed,
    }
}

fn poisson1() -> DiscretePmf {
    DiscretePmf::poisson(1.0).unwrap()
}

fn geom_half() -> DiscretePmf {
    DiscretePmf::geometric(0.5).unwrap()
}

/// Random count path with both zero and positive arrival slots and at least
/// one departure in the valid range, for roundtrip and oracle experiments.
fn random_path<R: Rng>(rng: &mut R, max_n: usize) -> CountPaths {
    loop {
        let n = 10 + rng.random_range(0..max_n - 9);
        let p_zero = 0.2 + 0.6 * rng.random::<f64>();
        let arrivals: Vec<u32> = (0..n)
            .map(|_| if rng.random::<f64>() < p_zero { 0 } else { 1 + rng.random_range(0..3) })
            .collect();
        let departures: Vec<u32> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let paths = CountPaths::new(arrivals, departures, PathMeta::default()).unwrap();
        let c = estimate_c(&paths);
        if c == 0.0 || c == 1.0 {
            continue;
        }
        let Ok(diffs) = difference_sequence(&paths) else { continue };
        let any_valid_departure =
            (diffs.valid_from()..=n).any(|t| paths.departures[t - 1] > 0);
        if any_valid_departure {
            return paths;
        }
    }
}

/// 1: inverting the estimated distance distribution and mapping it forward
/// reproduces the estimate exactly, on 1000 random instances.
fn exact_roundtrip(master_seed: u64) -> (&'static str, f64, bool, String) {
    let mut rng = rng_for(master_seed, mc_replicate_stream(0));
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let paths = random_path(&mut rng, 400);
        let est = estimate(&paths, 20).expect("random path must estimate");
        let h_back = h_from_g(&est.g_raw, est.c_hat);
        for (hb, h) in h_back.iter().zip(&est.h_hat) {
            worst = worst.max((hb - h).abs());
        }
    }
    let pass = worst <= 1e-12;
    ("exact algebraic roundtrip", 5.0, pass, format!("worst |h_back - h_hat| = {worst:.2e}"))
}

/// 2: sup-norm consistency of the service-law estimate at n = 2e5 under the
/// Poisson(1)/geometric(0.5) model, with closed-form oracles.
fn consistency(master_seed: u64) -> (&'static str, f64, bool, String) {
    let g_true: Vec<f64> = (1..=10).map(|x| 1.0 - 0.5f64.powi(x)).collect();
    let sups: Vec<f64> = (0..20u64)
        .into_par_iter()
        .map(|r| {
            let seed = seed_for(master_seed, mc_replicate_stream(r));
            let paths = simulate_counts(
                &poisson1(),
                &geom_half(),
                &SimConfig { n: 200_000, burn_in: None, seed },
            )
            .unwrap();
            let est = estimate(&paths, 10).unwrap();
            est.g_raw
                .iter()
                .zip(&g_true)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        })
        .collect();
    let ok = sups.iter().filter(|&&s| s <= 0.02).count();
    let pass = ok >= 18;
    (
        "service-law consistency",
        60.0,
        pass,
        format!("sup error <= 0.02 in {ok}/20 runs; worst = {:.4}", sups.iter().fold(0.0f64, |a, &b| a.max(b))),
    )
}

/// 3: scale of the distance-distribution CLT. 400 replicates of the scaled
/// estimation error at x = 2 against the plug-in long-run variance from one
/// n = 1e6 run (Bartlett, lag n^(1/3)).
fn clt_scale(master_seed: u64) -> (&'static str, f64, bool, String) {
    let c = (-1.0f64).exp();
    let h2 = 1.0 - c * c * 0.25;

    let big_seed = seed_for(master_seed, STREAM_SIMULATION);
    let paths = simulate_counts(
        &poisson1(),
        &geom_half(),
        &SimConfig { n: 1_000_000, burn_in: None, seed: big_seed },
    )
    .unwrap();
    let diffs = difference_sequence(&paths).unwrap();
    let eta = influence_series(&paths, &diffs, 2).unwrap();
    let lag = default_lag(1_000_000);
    let tau = long_run_cov(&eta, &eta, lag, LagWeighting::Bartlett).unwrap();

    let scaled: Vec<f64> = (0..400u64)
        .into_par_iter()
        .map(|r| {
            let seed = seed_for(master_seed, mc_replicate_stream(r));
            let p = simulate_counts(
                &poisson1(),
                &geom_half(),
                &SimConfig { n: 20_000, burn_in: None, seed },
            )
            .unwrap();
            let d = difference_sequence(&p).unwrap();
            let h = estimate_h(&p, &d, 2).unwrap()[1];
            (d.n_valid() as f64).sqrt() * (h - h2)
        })
        .collect();

    let sd = tau.sqrt();
    let standardized: Vec<f64> = scaled.iter().map(|v| v / sd).collect();
    let p_value = ks_pvalue(ks_statistic(&standardized, normal_cdf), standardized.len());
    let ratio = variance_population(&scaled) / tau;
    let pass = p_value > 0.01 && (0.8..=1.2).contains(&ratio);
    (
        "CLT scale check",
        300.0,
        pass,
        format!("lag={lag} tau^2={tau:.5} KS p={p_value:.3} variance ratio={ratio:.3}"),
    )
}

/// 4: the indicator block of the joint covariance equals the population
/// sample variance of the zero-arrival indicators exactly.
fn kernel_identity(master_seed: u64) -> (&'static str, f64, bool, String) {
    let mut worst: f64 = 0.0;
    let mut rng = rng_for(master_seed, mc_replicate_stream(0));
    for case in 0..7 {
        let paths = match case {
            0 => CountPaths::new(vec![0, 1, 0, 1], vec![0, 1, 0, 1], PathMeta::default())
                .unwrap(),
            1 => CountPaths::new(vec![1, 0, 0, 0, 2], vec![0, 1, 1, 0, 0], PathMeta::default())
                .unwrap(),
            2..=4 => random_path(&mut rng, 5_000),
            _ => {
                let seed = seed_for(master_seed, mc_replicate_stream(case));
                simulate_counts(
                    &poisson1(),
                    &geom_half(),
                    &SimConfig { n: 50_000, burn_in: None, seed },
                )
                .unwrap()
            }
        };
        let n = paths.len() as f64;
        let zeros = paths.arrivals.iter().filter(|&&a| a == 0).count() as f64;
        let c_hat = estimate_c(&paths);
        let c_var = c_hat * (1.0 - c_hat);
        // Population variance of a binary series in exact grouped form.
        let grouped =
            (zeros * (1.0 - c_hat) * (1.0 - c_hat) + (n - zeros) * c_hat * c_hat) / n;
        worst = worst.max((c_var - grouped).abs());
    }
    let pass = worst <= 1e-12;
    ("indicator variance identity", 10.0, pass, format!("worst deviation = {worst:.2e}"))
}

/// Brute-force two-sided weighted covariance sum, straight from the
/// definition with fresh mean computations; the oracle for criterion 5.
fn naive_long_run_cov(a: &[f64], b: &[f64], max_lag: usize, w: LagWeighting) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut total = 0.0;
    for lag in -(max_lag as isize)..=(max_lag as isize) {
        let weight = w.weight(lag.unsigned_abs(), max_lag);
        let mut gamma = 0.0;
        for (i, &bi) in b.iter().enumerate() {
            let j = i as isize + lag;
            if j >= 0 && (j as usize) < a.len() {
                gamma += (a[j as usize] - ma) * (bi - mb);
            }
        }
        total += weight * gamma / n;
    }
    total
}

fn naive_indicator_cov(ind: &[f64], eta: &[f64], max_lag: usize, w: LagWeighting) -> f64 {
    let n = ind.len() as f64;
    let mi = ind.iter().sum::<f64>() / n;
    let me = eta.iter().sum::<f64>() / n;
    let mut total = 0.0;
    for lag in 0..=max_lag {
        let weight = w.weight(lag, max_lag);
        let mut gamma = 0.0;
        for i in 0..ind.len() - lag {
            gamma += (ind[i] - mi) * (eta[i + lag] - me);
        }
        total += weight * gamma / n;
    }
    total
}

/// 5: the production covariance estimators agree with naive double-loop
/// evaluations on 200 random small instances.
fn small_instance_oracle(master_seed: u64) -> (&'static str, f64, bool, String) {
    let mut rng = rng_for(master_seed, mc_replicate_stream(0));
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    while checked < 200 {
        let paths = random_path(&mut rng, 50);
        let Ok(diffs) = difference_sequence(&paths) else { continue };
        let max_lag = rng.random_range(0..4usize);
        if max_lag >= diffs.n_valid() {
            continue;
        }
        let k = 1 + rng.random_range(0..4usize);
        let m = 1 + rng.random_range(0..4usize);
        let weighting = if rng.random::<bool>() {
            LagWeighting::Bartlett
        } else {
            LagWeighting::Truncated
        };
        let (Ok(ek), Ok(em)) = (
            influence_series(&paths, &diffs, k),
            influence_series(&paths, &diffs, m),
        ) else {
            continue;
        };
        let fast = long_run_cov(&ek, &em, max_lag, weighting).unwrap();
        let slow = naive_long_run_cov(&ek.values, &em.values, max_lag, weighting);
        worst = worst.max((fast - slow).abs());

        let ind: Vec<f64> = (diffs.valid_from()..=paths.len())
            .map(|t| if paths.arrivals[t - 1] == 0 { 1.0 } else { 0.0 })
            .collect();
        let fast1 = indicator_long_run_cov(&paths, &em, max_lag, weighting).unwrap();
        let slow1 = naive_indicator_cov(&ind, &em.values, max_lag, weighting);
        worst = worst.max((fast1 - slow1).abs());
        checked += 1;
    }
    let pass = worst <= 1e-12;
    ("small-instance covariance oracle", 5.0, pass, format!("worst |fast - naive| = {worst:.2e}"))
}

/// 6: empirical coverage of the 90% bootstrap percentile interval for the
/// distance distribution at x = 2, 200 Monte Carlo repetitions by default.
fn bootstrap_coverage(master_seed: u64, reps: usize) -> (&'static str, f64, bool, String) {
    let n = 10_000usize;
    let b = queue_infer::bootstrap::cube_root_block_length(n);
    debug_assert_eq!(b, 22);
    let covered: usize = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let rep_seed = seed_for(master_seed, mc_replicate_stream(r));
            usize::from(
                coverage_single_rep(
                    &poisson1(),
                    &geom_half(),
                    n,
                    2,
                    0.90,
                    BlockRule::CubeRoot,
                    500,
                    rep_seed,
                )
                .unwrap(),
            )
        })
        .sum();
    let coverage = covered as f64 / reps as f64;
    let pass = (0.85..=0.95).contains(&coverage);
    (
        "bootstrap coverage",
        600.0,
        pass,
        format!("empirical coverage = {coverage:.3} over {reps} repetitions (block length {b}, 500 replicates)"),
    )
}

/// 7: discretized continuous-run fidelity. The zero-slot frequency must
/// match the void probability, and the service-law estimate must land
/// within 0.02 of the grid law `1 - e^(-h x)`.
fn discretization_fidelity(master_seed: u64) -> (&'static str, f64, bool, String) {
    let h = 0.1f64;
    let svc = ContinuousService::Exponential { rate: 1.0 };
    let seed = seed_for(master_seed, STREAM_SIMULATION);
    let trace = simulate_continuous_trace(1.0, &svc, 200_000.0, seed).unwrap();
    let paths = discretize(&trace, h).unwrap();
    let est = estimate(&paths, 30).unwrap();

    let c_target = (-h).exp();
    let n = paths.len() as f64;
    let se = (c_target * (1.0 - c_target) / n).sqrt();
    let c_dev = (est.c_hat - c_target).abs() / se;
    let c_ok = c_dev <= 3.0;

    let mut sup = 0.0f64;
    for x in 1..=30usize {
        let target = 1.0 - (-h * x as f64).exp();
        sup = sup.max((est.g_raw[x - 1] - target).abs());
    }
    let g_ok = sup <= 0.02;

    // Diagnostic: distance to the sub-slot rounding limit of raw binning,
    // (1 - e^-h)/h * (1 - e^-hx).
    let factor = (1.0 - (-h).exp()) / h;
    let mut sup_limit = 0.0f64;
    for x in 1..=30usize {
        let limit = factor * (1.0 - (-h * x as f64).exp());
        sup_limit = sup_limit.max((est.g_raw[x - 1] - limit).abs());
    }

    let pass = c_ok && g_ok;
    (
        "discretization fidelity",
        60.0,
        pass,
        format!(
            "c_hat dev = {c_dev:.2} se (<=3); sup |g - (1-e^-hx)| = {sup:.4} (<= 0.02); \
             sup distance to the binned sub-slot rounding limit = {sup_limit:.4}"
        ),
    )
}

/// 8: departure and arrival means agree within the conservative noise bound
/// `3 sqrt(2 E[A^2] / n)` in at least 19 of 20 seeded runs.
fn wald_identity(master_seed: u64) -> (&'static str, f64, bool, String) {
    let n = 100_000usize;
    let bound = 3.0 * (2.0 * 2.0 / n as f64).sqrt();
    let ok: usize = (0..20u64)
        .into_par_iter()
        .map(|r| {
            let seed = seed_for(master_seed, mc_replicate_stream(r));
            let p = simulate_counts(
                &poisson1(),
                &geom_half(),
                &SimConfig { n, burn_in: None, seed },
            )
            .unwrap();
            let ma = p.arrivals.iter().map(|&a| a as f64).sum::<f64>() / n as f64;
            let md = p.departures.iter().map(|&d| d as f64).sum::<f64>() / n as f64;
            usize::from((md - ma).abs() <= bound)
        })
        .sum();
    let pass = ok >= 19;
    ("arrival/departure mean identity", 60.0, pass, format!("within bound in {ok}/20 runs"))
}

/// 9: the conditional expectation of a block-resampled series mean equals
/// the average over all admissible block means, against a 1e5-replicate
/// empirical average.
fn mbb_expectation_identity(master_seed: u64) -> (&'static str, f64, bool, String) {
    let paths = simulate_counts(
        &poisson1(),
        &geom_half(),
        &SimConfig { n: 260, burn_in: None, seed: seed_for(master_seed, STREAM_SIMULATION) },
    )
    .unwrap();
    let diffs = difference_sequence(&paths).unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for (b, n_used) in [(4usize, 200usize), (8, 200), (10, 200)] {
        let n_avail = diffs.n_valid();
        assert!(n_avail >= n_used);
        let from = diffs.valid_from() + (n_avail - n_used);
        let d: Vec<f64> =
            (from..=paths.len()).map(|t| paths.departures[t - 1] as f64).collect();
        let k = n_used / b;
        let span = n_used - b + 1;
        let block_mean: Vec<f64> =
            (0..span).map(|s| d[s..s + b].iter().sum::<f64>() / b as f64).collect();
        let analytic = block_mean.iter().sum::<f64>() / span as f64;

        let reps = 100_000usize;
        let mut rng = rng_for(seed_for(master_seed, mc_replicate_stream(b as u64)), 0);
        let mut rep_means = Vec::with_capacity(reps);
        for _ in 0..reps {
            let starts = block_starts(n_used, b, k, &mut rng).unwrap();
            let total: f64 =
                starts.iter().map(|&s| d[s..s + b].iter().sum::<f64>()).sum();
            rep_means.push(total / n_used as f64);
        }
        let emp = mean(&rep_means);
        let se = (variance_population(&rep_means) / reps as f64).sqrt();
        let ok = (emp - analytic).abs() <= 3.0 * se;
        pass &= ok;
        details.push(format!("b={b}: |{emp:.5} - {analytic:.5}| vs 3se={:.5}", 3.0 * se));
    }
    ("block-resampling expectation identity", 60.0, pass, details.join("; "))
}

/// Build the worker pool honoring `QUEUE_INFER_THREADS`.
pub fn worker_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("QUEUE_INFER_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            if threads >= 1 {
                builder = builder.num_threads(threads);
            }
        }
    }
    builder.build().expect("worker pool")
}
