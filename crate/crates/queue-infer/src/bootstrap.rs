//! Moving-block bootstrap for the distance-distribution and service-law
//! estimators.
//!
//! The estimator's ingredients are serially dependent, so replication
//! resamples contiguous blocks: with block length `b` and `k = n_used / b`,
//! each replicate concatenates `k` blocks whose start offsets are i.i.d.
//! uniform over the valid window. The joint rows `(D(i), 1{Z(i) <= x})` are
//! resampled together so every replicate evaluates the same ratio statistic
//! as the original sample; the service-law transform is applied with the
//! full-sample `c_hat` held fixed as a plug-in.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::DiscretePmf;
use crate::error::Error;
use crate::estimator::{
    difference_sequence, estimate_c, h_from_g, x_cap_for, DifferenceSequence,
};
use crate::seeding::{mc_replicate_stream, rng_for, seed_for, STREAM_BOOTSTRAP};
use crate::simulator::{simulate_counts, CountPaths, SimConfig};
use crate::stats::quantile;
use crate::Result;

/// Block-length selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRule {
    /// Fixed block length.
    Explicit(usize),
    /// `b = max(2, round(n^(1/3)))`; the exponent 1/3 sits strictly inside
    /// the (0, 2/5) range required for bootstrap validity.
    CubeRoot,
}

impl BlockRule {
    pub fn block_length(self, n_avail: usize) -> usize {
        match self {
            BlockRule::Explicit(b) => b,
            BlockRule::CubeRoot => cube_root_block_length(n_avail),
        }
    }
}

/// Default block-length rule `max(2, round(n^(1/3)))`.
pub fn cube_root_block_length(n: usize) -> usize {
    ((n as f64).powf(1.0 / 3.0).round() as usize).max(2)
}

/// Bootstrap configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub rule: BlockRule,
    /// Number of bootstrap replicates.
    pub replicates: usize,
    pub seed: u64,
}

/// Confidence-interval construction from the replicate distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMode {
    /// Plain quantiles of the replicates.
    Percentile,
    /// Reflected around the full-sample estimate.
    Basic,
}

/// A two-sided interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Draw `k` i.i.d. block start offsets uniform on `0..=n_used-b`.
pub fn block_starts<R: Rng + ?Sized>(
    n_used: usize,
    b: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if b == 0 || b > n_used {
        return Err(Error::InvalidInput(format!(
            "block length {b} must lie in 1..={n_used}"
        )));
    }
    if k.checked_mul(b).is_none() || k * b != n_used {
        return Err(Error::InvalidInput(format!(
            "block count {k} times block length {b} must equal n_used {n_used}"
        )));
    }
    let span = n_used - b + 1;
    Ok((0..k).map(|_| rng.random_range(0..span)).collect())
}

/// Result of a moving-block bootstrap run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub b_used: usize,
    pub k_used: usize,
    /// Trailing window length actually resampled (`k_used * b_used`).
    pub n_used: usize,
    pub replicates: usize,
    pub level: f64,
    pub ci_mode: CiMode,
    /// Plug-in zero-arrival frequency from the full original sample.
    pub c_hat: f64,
    /// Replicate rows of `h_hat*(1..=x_max)`.
    pub h_star: Vec<Vec<f64>>,
    /// Replicate rows of the service-law transform, capped by the
    /// `c_hat^x` guard.
    pub g_star: Vec<Vec<f64>>,
    pub ci_h: Vec<Interval>,
    pub ci_g: Vec<Interval>,
    /// Replicates redrawn because every resampled departure count was zero.
    pub redraws: u64,
    pub warnings: Vec<String>,
}

/// Moving-block bootstrap of the distance-distribution estimator.
///
/// Uses the trailing `k * b` valid slots, resamples whole rows, and
/// produces replicate curves plus confidence intervals at `level`.
pub fn bootstrap_h(
    paths: &CountPaths,
    diffs: &DifferenceSequence,
    x_max: usize,
    cfg: &BlockConfig,
    level: f64,
    ci_mode: CiMode,
) -> Result<BootstrapResult> {
    if x_max == 0 {
        return Err(Error::InvalidInput("x_max must be >= 1".into()));
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidInput("replicate count must be >= 1".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("level must lie in (0,1), got {level}")));
    }
    // A degenerate zero-arrival frequency only disables the service-law
    // transform; the distance-distribution side still bootstraps fine.
    let c_hat = estimate_c(paths);
    let c_usable = c_hat > 0.0 && c_hat < 1.0;

    let n_avail = diffs.n_valid();
    let b = cfg.rule.block_length(n_avail);
    if b < 2 || 2 * b > n_avail {
        return Err(Error::InvalidInput(format!(
            "block length {b} must satisfy 2 <= b <= n/2 with n = {n_avail}"
        )));
    }
    let k = n_avail / b;
    let n_used = k * b;

    // Trailing window of the valid range, as (D, Z) rows.
    let from = diffs.valid_from() + (n_avail - n_used);
    let d: Vec<u32> = (from..=paths.len()).map(|t| paths.departures[t - 1]).collect();
    let z: Vec<u32> = (from..=paths.len()).map(|t| diffs.value_at(t)).collect();
    debug_assert_eq!(d.len(), n_used);

    // Prefix sums of D drive the denominator and the redraw rule.
    let mut pd = vec![0u64; n_used + 1];
    for i in 0..n_used {
        pd[i + 1] = pd[i] + d[i] as u64;
    }

    const MAX_REDRAWS: usize = 100;
    let mut all_starts: Vec<usize> = Vec::with_capacity(cfg.replicates * k);
    let mut denoms: Vec<u64> = Vec::with_capacity(cfg.replicates);
    let mut redraws = 0u64;
    for r in 0..cfg.replicates {
        let mut rng = rng_for(cfg.seed, r as u64);
        let mut attempt = 0;
        loop {
            let starts = block_starts(n_used, b, k, &mut rng)?;
            let denom: u64 = starts.iter().map(|&s| pd[s + b] - pd[s]).sum();
            if denom > 0 {
                all_starts.extend_from_slice(&starts);
                denoms.push(denom);
                break;
            }
            attempt += 1;
            redraws += 1;
            if attempt >= MAX_REDRAWS {
                return Err(Error::DegenerateReplicate { attempts: attempt });
            }
        }
    }

    // One pass per level x: prefix sums of D 1{Z <= x}, then block sums.
    let x_cap = if c_usable { x_max.min(x_cap_for(c_hat)) } else { 0 };
    let mut warnings = Vec::new();
    if !c_usable {
        warnings.push(format!(
            "degenerate arrival-zero frequency (c_hat = {c_hat}): service-law replicates skipped"
        ));
    } else if x_cap < x_max {
        warnings.push(format!(
            "service-law replicates truncated at x = {x_cap} by the c_hat^x guard"
        ));
    }
    let mut h_star = vec![vec![0.0f64; x_max]; cfg.replicates];
    let mut px = vec![0u64; n_used + 1];
    for x in 1..=x_max {
        for i in 0..n_used {
            let hit = if z[i] as usize <= x { d[i] as u64 } else { 0 };
            px[i + 1] = px[i] + hit;
        }
        for r in 0..cfg.replicates {
            let starts = &all_starts[r * k..(r + 1) * k];
            let num: u64 = starts.iter().map(|&s| px[s + b] - px[s]).sum();
            h_star[r][x - 1] = num as f64 / denoms[r] as f64;
        }
    }

    let g_star: Vec<Vec<f64>> = h_star
        .iter()
        .map(|row| {
            (1..=x_cap)
                .map(|x| 1.0 - (1.0 - row[x - 1]) / c_hat.powi(x as i32))
                .collect()
        })
        .collect();

    // Reference estimate on the same trailing window for reflected CIs.
    let h_ref: Vec<f64> = {
        let total = pd[n_used] as f64;
        let mut weight = vec![0u64; x_max + 2];
        for i in 0..n_used {
            weight[(z[i] as usize).min(x_max + 1)] += d[i] as u64;
        }
        let mut acc = 0u64;
        (1..=x_max)
            .map(|x| {
                acc += weight[x];
                acc as f64 / total
            })
            .collect()
    };
    let g_ref: Vec<f64> = (1..=x_cap)
        .map(|x| 1.0 - (1.0 - h_ref[x - 1]) / c_hat.powi(x as i32))
        .collect();

    let ci_of = |column: &[f64], reference: f64| -> Interval {
        let lo_q = quantile(column, (1.0 - level) / 2.0);
        let hi_q = quantile(column, (1.0 + level) / 2.0);
        match ci_mode {
            CiMode::Percentile => Interval { lo: lo_q, hi: hi_q },
            CiMode::Basic => Interval { lo: 2.0 * reference - hi_q, hi: 2.0 * reference - lo_q },
        }
    };
    let mut column = vec![0.0f64; cfg.replicates];
    let mut ci_h = Vec::with_capacity(x_max);
    for x in 0..x_max {
        for (r, row) in h_star.iter().enumerate() {
            column[r] = row[x];
        }
        ci_h.push(ci_of(&column, h_ref[x]));
    }
    let mut ci_g = Vec::with_capacity(x_cap);
    for x in 0..x_cap {
        for (r, row) in g_star.iter().enumerate() {
            column[r] = row[x];
        }
        ci_g.push(ci_of(&column, g_ref[x]));
    }

    Ok(BootstrapResult {
        b_used: b,
        k_used: k,
        n_used,
        replicates: cfg.replicates,
        level,
        ci_mode,
        c_hat,
        h_star,
        g_star,
        ci_h,
        ci_g,
        redraws,
        warnings,
    })
}

/// Outcome of one coverage Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub reps: usize,
    pub covered: usize,
    pub coverage: f64,
    pub level: f64,
    pub x: usize,
    pub true_h: f64,
    pub n: usize,
    pub b_used: usize,
}

/// One replicate of the coverage experiment: simulate a fresh path with the
/// replicate's derived seed, bootstrap a percentile interval for `H(x)` and
/// test whether it covers the exact forward-map value.
#[allow(clippy::too_many_arguments)]
pub fn coverage_single_rep(
    arrival: &DiscretePmf,
    service: &DiscretePmf,
    n: usize,
    x: usize,
    level: f64,
    rule: BlockRule,
    replicates: usize,
    rep_seed: u64,
) -> Result<bool> {
    let c_true = arrival.zero_prob();
    let true_h = *h_from_g(&service.cdf_vec(x), c_true).last().unwrap();
    let sim = SimConfig { n, burn_in: None, seed: rep_seed };
    let paths = simulate_counts(arrival, service, &sim)?;
    let diffs = difference_sequence(&paths)?;
    let cfg = BlockConfig {
        rule,
        replicates,
        seed: seed_for(rep_seed, STREAM_BOOTSTRAP),
    };
    let boot = bootstrap_h(&paths, &diffs, x, &cfg, level, CiMode::Percentile)?;
    let ci = boot.ci_h[x - 1];
    Ok(ci.lo <= true_h && true_h <= ci.hi)
}

/// Repeated-simulation coverage check of the bootstrap interval for `H(x)`.
#[allow(clippy::too_many_arguments)]
pub fn coverage_experiment(
    arrival: &DiscretePmf,
    service: &DiscretePmf,
    n: usize,
    x: usize,
    level: f64,
    reps: usize,
    rule: BlockRule,
    replicates: usize,
    master_seed: u64,
) -> Result<CoverageReport> {
    if reps == 0 {
        return Err(Error::InvalidInput("coverage experiment needs reps >= 1".into()));
    }
    let mut covered = 0usize;
    for r in 0..reps {
        let rep_seed = seed_for(master_seed, mc_replicate_stream(r as u64));
        if coverage_single_rep(arrival, service, n, x, level, rule, replicates, rep_seed)? {
            covered += 1;
        }
    }
    let c_true = arrival.zero_prob();
    let true_h = *h_from_g(&service.cdf_vec(x), c_true).last().unwrap();
    Ok(CoverageReport {
        reps,
        covered,
        coverage: covered as f64 / reps as f64,
        level,
        x,
        true_h,
        n,
        b_used: rule.block_length(n),
    })
}
