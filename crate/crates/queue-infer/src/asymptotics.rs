//! Long-run covariance estimation and the Gaussian limit kernel of the
//! service-law estimator.
//!
//! The scaled estimation errors of `(c_hat, h_hat(1), ..., h_hat(x))` are
//! asymptotically jointly normal. Their covariances are infinite sums of
//! lagged cross-covariances of the estimator's *influence series*
//!
//! ```text
//! eta_i(k) = D(i) (1{Z(i) <= k} - H(k)) / E[D(0)],
//! ```
//!
//! estimated here by lag-truncated, optionally Bartlett-weighted sums (the
//! usual HAC recipe; Bartlett weights keep the stacked covariance matrix
//! positive semidefinite). The kernel of the limiting Gaussian sequence for
//! the service-law estimate is then an exact arithmetic pushforward of
//! those covariances through the derivative of the inversion map, assembled
//! by [`limit_kernel`] with plug-in estimates, and feeds the normal-theory
//! confidence bands in [`normal_band`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::estimator::{estimate_c, estimate_h, x_cap_for, DifferenceSequence};
use crate::linalg::{mat_vec, psd_factor, Matrix};
use crate::simulator::CountPaths;
use crate::stats::{normal_quantile, quantile};
use crate::Result;

/// Lag weighting for truncated long-run covariance sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagWeighting {
    /// Unit weight on every lag up to the truncation point.
    Truncated,
    /// Bartlett taper `1 - l/(L+1)`.
    Bartlett,
}

impl LagWeighting {
    #[inline]
    pub fn weight(self, lag: usize, max_lag: usize) -> f64 {
        match self {
            LagWeighting::Truncated => 1.0,
            LagWeighting::Bartlett => 1.0 - lag as f64 / (max_lag as f64 + 1.0),
        }
    }
}

/// Default truncation lag `floor(n^(1/3))` for a series of length `n`,
/// exact on perfect cubes.
pub fn default_lag(n: usize) -> usize {
    let mut l = (n as f64).cbrt().floor() as usize;
    while (l + 1).pow(3) <= n {
        l += 1;
    }
    while l > 0 && l.pow(3) > n {
        l -= 1;
    }
    l
}

/// Influence series of `h_hat(k)` over the valid slots of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceSeries {
    /// `eta_i(k)` for slots `valid_from..=n`, in slot order.
    pub values: Vec<f64>,
    /// Level of the indicator `1{Z <= k}`.
    pub k: usize,
    /// Mean departure count over the valid slots (the plug-in for `E[D]`).
    pub mean_d: f64,
    /// First 1-based slot included.
    pub valid_from: usize,
}

/// Build the influence series `eta_i(k)` with the same-sample `h_hat(k)`
/// plugged in; its sample mean is zero by the ratio-estimator identity.
pub fn influence_series(
    paths: &CountPaths,
    diffs: &DifferenceSequence,
    k: usize,
) -> Result<InfluenceSeries> {
    if k == 0 {
        return Err(Error::InvalidInput("indicator level k must be >= 1".into()));
    }
    let h_k = *estimate_h(paths, diffs, k)?.last().unwrap();
    let from = diffs.valid_from();
    let n_valid = diffs.n_valid();
    let sum_d: u64 = (from..=paths.len()).map(|t| paths.departures[t - 1] as u64).sum();
    let mean_d = sum_d as f64 / n_valid as f64;
    let values: Vec<f64> = (from..=paths.len())
        .map(|t| {
            let d = paths.departures[t - 1] as f64;
            let ind = if (diffs.value_at(t) as usize) <= k { 1.0 } else { 0.0 };
            d * (ind - h_k) / mean_d
        })
        .collect();
    Ok(InfluenceSeries { values, k, mean_d, valid_from: from })
}

/// Subtract the sample mean once; the covariance loops then reduce to
/// lagged dot products.
fn centered(xs: &[f64]) -> Vec<f64> {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| x - mean).collect()
}

/// Lagged cross-moment `(1/N) sum a[i+lag] b[i]` of centered series, with
/// population normalization; `lag` may be negative to lead `b`.
fn cross_cov_centered(a: &[f64], b: &[f64], lag: isize) -> f64 {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    let l = lag.unsigned_abs();
    if l >= n {
        return 0.0;
    }
    let mut acc = 0.0;
    if lag >= 0 {
        for i in 0..n - l {
            acc += a[i + l] * b[i];
        }
    } else {
        for i in 0..n - l {
            acc += a[i] * b[i + l];
        }
    }
    acc / n as f64
}

/// Two-sided truncated long-run covariance of two influence series:
/// `gamma(0) + sum_{l=1..L} w_l (gamma(l) + gamma(-l))` with empirical
/// cross-covariances `gamma`.
pub fn long_run_cov(
    a: &InfluenceSeries,
    b: &InfluenceSeries,
    max_lag: usize,
    weighting: LagWeighting,
) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(Error::InvalidInput(
            "influence series have different lengths".into(),
        ));
    }
    let n = a.values.len();
    if max_lag >= n {
        return Err(Error::InvalidInput(format!(
            "lag truncation {max_lag} must be below series length {n}"
        )));
    }
    let ca = centered(&a.values);
    let cb = centered(&b.values);
    let mut total = cross_cov_centered(&ca, &cb, 0);
    for l in 1..=max_lag {
        let w = weighting.weight(l, max_lag);
        total += w * (cross_cov_centered(&ca, &cb, l as isize)
            + cross_cov_centered(&ca, &cb, -(l as isize)));
    }
    Ok(total)
}

/// One-sided long-run covariance between the zero-arrival indicator and an
/// influence series: `sum_{l=0..L} w_l cov(1{A(i)=0}, eta_{i+l})`, the
/// forward-lag series entering the mixed block of the limit covariance.
pub fn indicator_long_run_cov(
    paths: &CountPaths,
    etas: &InfluenceSeries,
    max_lag: usize,
    weighting: LagWeighting,
) -> Result<f64> {
    let from = etas.valid_from;
    let n = etas.values.len();
    if from + n != paths.len() + 1 {
        return Err(Error::InvalidInput(
            "influence series does not match the path's valid range".into(),
        ));
    }
    if max_lag >= n {
        return Err(Error::InvalidInput(format!(
            "lag truncation {max_lag} must be below series length {n}"
        )));
    }
    let indicator: Vec<f64> = (from..=paths.len())
        .map(|t| if paths.arrivals[t - 1] == 0 { 1.0 } else { 0.0 })
        .collect();
    let ce = centered(&etas.values);
    let ci = centered(&indicator);
    let mut total = 0.0;
    for l in 0..=max_lag {
        let w = weighting.weight(l, max_lag);
        total += w * cross_cov_centered(&ce, &ci, l as isize);
    }
    Ok(total)
}

/// Estimated covariance structure of the limit distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSet {
    /// Evaluation bound actually used (after the `c_hat^x` guard).
    pub x_dim: usize,
    pub lag_l: usize,
    pub weighting: LagWeighting,
    /// Long-run covariances of the influence series, `tau[k-1][m-1]`.
    pub tau: Matrix,
    /// One-sided covariances against the zero-arrival indicator.
    pub tau1: Vec<f64>,
    /// Variance of the zero-arrival indicator, `c_hat (1 - c_hat)`.
    pub c_var: f64,
    /// Covariance kernel of the limiting Gaussian sequence for the
    /// service-law estimate; flagged entries are NaN.
    pub v_kernel: Matrix,
    pub c_hat: f64,
    pub h_hat: Vec<f64>,
    pub n_used: usize,
    pub warnings: Vec<String>,
}

/// Assemble the full kernel estimate for one path: influence series at
/// every level up to `x_max` (capped by the `c_hat^x` guard), their
/// long-run covariance matrix, the indicator covariances and the
/// pushed-forward limit kernel.
pub fn build_kernel_set(
    paths: &CountPaths,
    diffs: &DifferenceSequence,
    x_max: usize,
    lag: usize,
    weighting: LagWeighting,
) -> Result<KernelSet> {
    let c_hat = estimate_c(paths);
    if !(c_hat > 0.0 && c_hat < 1.0) {
        return Err(Error::DegenerateCHat(c_hat));
    }
    let x_dim = x_max.min(x_cap_for(c_hat));
    if x_dim == 0 {
        return Err(Error::InvalidInput(
            "no evaluation points survive the c_hat^x guard".into(),
        ));
    }
    let mut warnings = Vec::new();
    if x_dim < x_max {
        warnings.push(format!("kernel truncated at x = {x_dim} by the c_hat^x guard"));
    }
    let h_hat = estimate_h(paths, diffs, x_dim)?;
    let etas: Vec<InfluenceSeries> = (1..=x_dim)
        .map(|k| influence_series(paths, diffs, k))
        .collect::<Result<_>>()?;

    let mut tau = Matrix::zeros(x_dim);
    for k in 0..x_dim {
        for m in k..x_dim {
            let v = long_run_cov(&etas[k], &etas[m], lag, weighting)?;
            tau.set(k, m, v);
            tau.set(m, k, v);
        }
    }
    let tau1: Vec<f64> = etas
        .iter()
        .map(|e| indicator_long_run_cov(paths, e, lag, weighting))
        .collect::<Result<_>>()?;

    let (v_kernel, mut kernel_warnings) = limit_kernel(&tau, &tau1, c_hat, &h_hat);
    warnings.append(&mut kernel_warnings);

    Ok(KernelSet {
        x_dim,
        lag_l: lag,
        weighting,
        tau,
        tau1,
        c_var: c_hat * (1.0 - c_hat),
        v_kernel,
        c_hat,
        h_hat,
        n_used: etas.first().map_or(0, |e| e.values.len()),
        warnings,
    })
}

/// Covariance kernel of the limiting Gaussian sequence of the service-law
/// estimate, evaluated with plug-ins.
///
/// First-order expansion of the inversion: with `u` and `v_k` the limits
/// of the scaled errors of `c_hat` and `h_hat(k)`,
///
/// ```text
/// V_k = v_k / c^k + k (1-H(k)) u / c^(k+1),
/// ```
///
/// so with `Var(u) = c(1-c)`, `Cov(v_k, v_m) = tau_{k,m}` and
/// `Cov(u, v_m) = tau1_m`,
///
/// ```text
/// E[V_k V_m] = tau_{k,m} / c^{k+m}
///            + k m (1-H(k)) (1-H(m)) (1-c) / c^{k+m+1}
///            + k (1-H(k)) tau1_m / c^{k+m+1}
///            + m (1-H(m)) tau1_k / c^{k+m+1}
/// ```
///
/// The mixed covariance is negative in this model (a zero-heavy sample
/// stretches the observed distances), so the cross terms shrink the
/// kernel; a replicate study pins the signs down. Entries whose
/// `c^{k+m+1}` underflows are flagged NaN and reported.
pub fn limit_kernel(
    tau: &Matrix,
    tau1: &[f64],
    c_hat: f64,
    h_hat: &[f64],
) -> (Matrix, Vec<String>) {
    let dim = tau.dim;
    assert_eq!(tau1.len(), dim);
    assert_eq!(h_hat.len(), dim);
    assert!(c_hat > 0.0 && c_hat < 1.0);
    let mut out = Matrix::zeros(dim);
    let mut warnings = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            let (k, m) = (i as f64 + 1.0, j as f64 + 1.0);
            let c_km = c_hat.powi((i + j + 2) as i32);
            let c_km1 = c_hat.powi((i + j + 3) as i32);
            let v = if c_km1 < f64::MIN_POSITIVE {
                warnings.push(format!(
                    "kernel entry ({},{}) flagged: c_hat^(k+m+1) underflows",
                    i + 1,
                    j + 1
                ));
                f64::NAN
            } else {
                let hk = 1.0 - h_hat[i];
                let hm = 1.0 - h_hat[j];
                tau.get(i, j) / c_km + k * m * hk * hm * (1.0 - c_hat) / c_km1
                    + k * hk * tau1[j] / c_km1
                    + m * hm * tau1[i] / c_km1
            };
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    (out, warnings)
}

/// Band construction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandMode {
    /// Per-point normal interval at the given level.
    Pointwise,
    /// Simultaneous band from the simulated supremum of the Gaussian limit.
    Uniform,
}

/// One confidence interval of a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    /// Evaluation point (1-based).
    pub x: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Confidence band around a sequence estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalBand {
    pub mode: BandMode,
    pub level: f64,
    pub points: Vec<BandPoint>,
    pub warnings: Vec<String>,
}

/// Number of Gaussian draws used for uniform bands.
pub const BAND_DRAWS: usize = 2000;

/// Normal-theory confidence band around `center` (the raw service-law
/// estimate) using the limit kernel `vk` and sample size `n`.
///
/// Pointwise mode uses `z_(1+level)/2 sqrt(vk_xx / n)` per point. Uniform
/// mode simulates [`BAND_DRAWS`] draws of the Gaussian limit from the
/// kernel's positive-semidefinite part and takes the level-quantile of the
/// supremum of |draw| over the unflagged points; the supremum quantile is
/// never below any per-point quantile, and the Monte Carlo estimate is
/// floored accordingly. Flagged (NaN-diagonal) points are omitted with a
/// warning.
pub fn normal_band<R: Rng + ?Sized>(
    center: &[f64],
    vk: &Matrix,
    n: usize,
    level: f64,
    mode: BandMode,
    rng: &mut R,
) -> Result<NormalBand> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("level must lie in (0,1), got {level}")));
    }
    if center.len() != vk.dim {
        return Err(Error::InvalidInput(
            "estimate and kernel dimensions differ".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let mut warnings = Vec::new();
    let mut usable = Vec::new();
    for x in 0..vk.dim {
        let d = vk.get(x, x);
        if d.is_nan() {
            warnings.push(format!("interval at x = {} omitted: kernel entry flagged", x + 1));
        } else {
            if d < -1e-8 {
                return Err(Error::InvalidInput(format!(
                    "kernel diagonal at x = {} is negative beyond slack: {d}",
                    x + 1
                )));
            }
            usable.push(x);
        }
    }
    if usable.is_empty() {
        return Err(Error::InvalidInput("no usable kernel entries for a band".into()));
    }
    let z = normal_quantile(0.5 + level / 2.0);
    let sd = |x: usize| (vk.get(x, x).max(0.0) / n as f64).sqrt();

    let points = match mode {
        BandMode::Pointwise => usable
            .iter()
            .map(|&x| {
                let half = z * sd(x);
                BandPoint { x: x + 1, lo: center[x] - half, hi: center[x] + half }
            })
            .collect(),
        BandMode::Uniform => {
            // Restrict the kernel to the usable points and factor its PSD part.
            let dim = usable.len();
            let mut sub = Matrix::zeros(dim);
            for (a, &xa) in usable.iter().enumerate() {
                for (b, &xb) in usable.iter().enumerate() {
                    sub.set(a, b, vk.get(xa, xb));
                }
            }
            let factor = psd_factor(&sub);
            let mut sups = Vec::with_capacity(BAND_DRAWS);
            for _ in 0..BAND_DRAWS {
                let xi: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let draw = mat_vec(&factor, &xi);
                let sup = draw.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                sups.push(sup);
            }
            let mc_q = quantile(&sups, level);
            // Exact lower bound: the sup quantile dominates each coordinate
            // quantile z * sigma_x.
            let floor = usable
                .iter()
                .map(|&x| z * vk.get(x, x).max(0.0).sqrt())
                .fold(0.0f64, f64::max);
            let q = mc_q.max(floor);
            usable
                .iter()
                .map(|&x| {
                    let half = q / (n as f64).sqrt();
                    BandPoint { x: x + 1, lo: center[x] - half, hi: center[x] + half }
                })
                .collect()
        }
    };
    Ok(NormalBand { mode, level, points, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DiscretePmf;
    use crate::linalg::sym_eigen;
    use crate::seeding::rng_for;
    use crate::simulator::{simulate_counts, PathMeta, SimConfig};

    fn paths_from(arrivals: Vec<u32>, departures: Vec<u32>) -> CountPaths {
        CountPaths::new(arrivals, departures, PathMeta::default()).unwrap()
    }

    fn sim_path(seed: u64, n: usize) -> CountPaths {
        let arrival = DiscretePmf::poisson(1.0).unwrap();
        let service = DiscretePmf::geometric(0.5).unwrap();
        simulate_counts(&arrival, &service, &SimConfig { n, burn_in: None, seed }).unwrap()
    }

    #[test]
    fn influence_series_centers_to_zero() {
        let paths = sim_path(31, 5_000);
        let diffs = crate::estimator::difference_sequence(&paths).unwrap();
        for k in [1usize, 2, 5] {
            let eta = influence_series(&paths, &diffs, k).unwrap();
            let sum: f64 = eta.values.iter().sum();
            assert!(sum.abs() < 1e-10, "influence sum {sum} at k={k}");
        }
    }

    #[test]
    fn influence_series_vanishes_on_zero_departures_and_saturated_levels() {
        let paths = paths_from(vec![1, 0, 1, 0, 1], vec![0, 1, 0, 2, 1]);
        let diffs = crate::estimator::difference_sequence(&paths).unwrap();
        let eta = influence_series(&paths, &diffs, 3).unwrap();
        // Slots with D = 0 contribute exactly zero.
        for (i, &v) in eta.values.iter().enumerate() {
            let t = eta.valid_from + i;
            if paths.departures[t - 1] == 0 {
                assert_eq!(v, 0.0);
            }
        }
        // A level at or above every distance makes the indicator constant 1
        // and h_hat(k) = 1, so the series is identically zero.
        let max_z = diffs.valid_values().iter().max().copied().unwrap() as usize;
        let eta = influence_series(&paths, &diffs, max_z).unwrap();
        assert!(eta.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn long_run_cov_zero_series_and_zero_lag() {
        let paths = sim_path(5, 2_000);
        let diffs = crate::estimator::difference_sequence(&paths).unwrap();
        let eta = influence_series(&paths, &diffs, 2).unwrap();
        let zero = InfluenceSeries {
            values: vec![0.0; eta.values.len()],
            k: 2,
            mean_d: eta.mean_d,
            valid_from: eta.valid_from,
        };
        assert_eq!(long_run_cov(&zero, &zero, 3, LagWeighting::Bartlett).unwrap(), 0.0);

        // L = 0 with k = m is the population sample variance of the series.
        let v = long_run_cov(&eta, &eta, 0, LagWeighting::Truncated).unwrap();
        let direct = crate::stats::variance_population(&eta.values);
        assert!((v - direct).abs() < 1e-12);
    }

    #[test]
    fn unit_service_collapses_long_run_variance() {
        let arrival = DiscretePmf::poisson(1.0).unwrap();
        let cfg = SimConfig { n: 4_000, burn_in: Some(2), seed: 17 };
        let paths = simulate_counts(&arrival, &DiscretePmf::point_mass(1), &cfg).unwrap();
        let diffs = crate::estimator::difference_sequence(&paths).unwrap();
        let eta = influence_series(&paths, &diffs, 1).unwrap();
        // Departures only ever occur one slot after an arrival, so the
        // indicator is 1 wherever D > 0 and the series is exactly zero.
        assert!(eta.values.iter().all(|&v| v == 0.0));
        let tau = long_run_cov(&eta, &eta, 5, LagWeighting::Bartlett).unwrap();
        assert_eq!(tau, 0.0);
    }

    #[test]
    fn hac_machinery_recovers_iid_departure_variance() {
        // Unit service makes D(t) = A(t-1), an i.i.d. Poisson series whose
        // long-run variance is the one-slot variance. Wrapping the raw
        // departure counts in an influence-series shell exercises the
        // unscaled specialization of the covariance estimator.
        let arrival = DiscretePmf::poisson(1.0).unwrap();
        let cfg = SimConfig { n: 50_000, burn_in: Some(2), seed: 55 };
        let paths = simulate_counts(&arrival, &DiscretePmf::point_mass(1), &cfg).unwrap();
        let diffs = crate::estimator::difference_sequence(&paths).unwrap();
        let values: Vec<f64> = (diffs.valid_from()..=paths.len())
            .map(|t| paths.departures[t - 1] as f64)
            .collect();
        let n = values.len();
        let series =
            InfluenceSeries { values, k: 1, mean_d: 1.0, valid_from: diffs.valid_from() };
        let lrv =
            long_run_cov(&series, &series, default_lag(n), LagWeighting::Bartlett).unwrap();
        assert!((lrv - 1.0).abs() < 0.1, "long-run variance {lrv} far from 1");
    }

    #[test]
    fn lag_bound_is_enforced() {
        let paths = sim_path(6, 100);
        let diffs = crate::estimator::difference_sequence(&paths).unwrap();
        let eta = influence_series(&paths, &diffs, 1).unwrap();
        let n = eta.values.len();
        assert!(long_run_cov(&eta, &eta, n, LagWeighting::Bartlett).is_err());
        assert!(indicator_long_run_cov(&paths, &eta, n, LagWeighting::Bartlett).is_err());
    }

    #[test]
    fn indicator_cov_vanishes_for_constant_indicator_and_saturated_level() {
        // All arrivals positive: the indicator series is constant zero.
        let paths = paths_from(vec![1, 2, 1, 3, 1, 2], vec![1, 1, 2, 0, 1, 1]);
        let diffs = crate::estimator::difference_sequence(&paths).unwrap();
        let eta = influence_series(&paths, &diffs, 2).unwrap();
        let v = indicator_long_run_cov(&paths, &eta, 2, LagWeighting::Truncated).unwrap();
        assert_eq!(v, 0.0);

        // Saturated level: eta is identically zero.
        let paths = sim_path(9, 500);
        let diffs = crate::estimator::difference_sequence(&paths).unwrap();
        let max_z = diffs.valid_values().iter().max().copied().unwrap() as usize;
        let eta = influence_series(&paths, &diffs, max_z).unwrap();
        let v = indicator_long_run_cov(&paths, &eta, 2, LagWeighting::Bartlett).unwrap();
        assert_eq!(v, 0.0);
    }

    /// Brute-force reimplementation of the weighted two-sided sum, straight
    /// from the definition, kept independent of the production code path.
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

    fn naive_indicator_cov(
        ind: &[f64],
        eta: &[f64],
        max_lag: usize,
        w: LagWeighting,
    ) -> f64 {
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

    #[test]
    fn small_instance_matches_naive_double_loop() {
        let mut rng = rng_for(404, 0);
        for _ in 0..40 {
            let n = 10 + (rng.random::<u32>() % 41) as usize;
            let arrivals: Vec<u32> = (0..n).map(|_| rng.random::<u32>() % 3).collect();
            let departures: Vec<u32> = (0..n).map(|_| rng.random::<u32>() % 4).collect();
            let mut arrivals = arrivals;
            arrivals[0] = 1; // guarantee a first arrival
            let paths = paths_from(arrivals, departures);
            let diffs = match crate::estimator::difference_sequence(&paths) {
                Ok(d) => d,
                Err(_) => continue,
            };
            let max_lag = (rng.random::<u32>() % 4) as usize;
            for weighting in [LagWeighting::Truncated, LagWeighting::Bartlett] {
                let (k, m) = (1 + (rng.random::<u32>() % 4) as usize, 1 + (rng.random::<u32>() % 4) as usize);
                let (ek, em) = match (
                    influence_series(&paths, &diffs, k),
                    influence_series(&paths, &diffs, m),
                ) {
                    (Ok(a), Ok(b)) => (a, b),
                    _ => continue,
                };
                if max_lag >= ek.values.len() {
                    continue;
                }
                let fast = long_run_cov(&ek, &em, max_lag, weighting).unwrap();
                let slow = naive_long_run_cov(&ek.values, &em.values, max_lag, weighting);
                assert!((fast - slow).abs() < 1e-12, "tau mismatch: {fast} vs {slow}");

                let ind: Vec<f64> = (ek.valid_from..=paths.len())
                    .map(|t| if paths.arrivals[t - 1] == 0 { 1.0 } else { 0.0 })
                    .collect();
                let fast1 =
                    indicator_long_run_cov(&paths, &em, max_lag, weighting).unwrap();
                let slow1 = naive_indicator_cov(&ind, &em.values, max_lag, weighting);
                assert!((fast1 - slow1).abs() < 1e-12, "tau1 mismatch: {fast1} vs {slow1}");
            }
        }
    }

    #[test]
    fn default_lag_is_exact_on_cubes() {
        assert_eq!(default_lag(1_000_000), 100);
        assert_eq!(default_lag(27), 3);
        assert_eq!(default_lag(26), 2);
        assert_eq!(default_lag(20_000), 27);
    }

    #[test]
    fn limit_kernel_direct_arithmetic() {
        // tau = 0, tau1 = 0, c = 0.5, H(1) = 0.75 at k = m = 1:
        // 1 * 0.25^2 * 0.5 / 0.5^3 = 0.25.
        let tau = Matrix::zeros(1);
        let (vk, warn) = limit_kernel(&tau, &[0.0], 0.5, &[0.75]);
        assert!(warn.is_empty());
        assert!((vk.get(0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn limit_kernel_reduces_to_scaled_tau_when_h_saturates() {
        let mut tau = Matrix::zeros(2);
        tau.set(0, 0, 0.3);
        tau.set(0, 1, 0.1);
        tau.set(1, 0, 0.1);
        tau.set(1, 1, 0.2);
        let c: f64 = 0.6;
        let (vk, _) = limit_kernel(&tau, &[0.05, -0.02], c, &[1.0, 1.0]);
        for i in 0..2 {
            for j in 0..2 {
                let expected = tau.get(i, j) / c.powi((i + j + 2) as i32);
                assert!((vk.get(i, j) - expected).abs() < 1e-12);
            }
        }
        assert_eq!(vk.asymmetry(), 0.0);
    }

    #[test]
    fn kernel_set_is_symmetric_and_indicator_variance_identity_holds() {
        let paths = sim_path(23, 20_000);
        let diffs = crate::estimator::difference_sequence(&paths).unwrap();
        let ks = build_kernel_set(&paths, &diffs, 6, 10, LagWeighting::Bartlett).unwrap();
        assert_eq!(ks.tau.asymmetry(), 0.0);
        assert_eq!(ks.v_kernel.asymmetry(), 0.0);

        // c_hat (1 - c_hat) equals the population variance of the
        // zero-arrival indicators, computed here in exact grouped form.
        let n = paths.len() as f64;
        let zeros = paths.arrivals.iter().filter(|&&a| a == 0).count() as f64;
        let c = zeros / n;
        let grouped = zeros * (1.0 - c) * (1.0 - c) + (n - zeros) * c * c;
        assert!((ks.c_var - grouped / n).abs() < 1e-12);

        // Diagonal of the limit kernel within numerical PSD slack.
        for i in 0..ks.x_dim {
            assert!(ks.v_kernel.get(i, i) >= -1e-8);
        }
        // Truncated diagonal sum is finite.
        let diag_sum: f64 = (0..ks.x_dim).map(|i| ks.tau.get(i, i)).sum();
        assert!(diag_sum.is_finite());
    }

    #[test]
    fn bartlett_stacked_covariance_is_psd() {
        let paths = sim_path(77, 8_000);
        let diffs = crate::estimator::difference_sequence(&paths).unwrap();
        let ks = build_kernel_set(&paths, &diffs, 5, 15, LagWeighting::Bartlett).unwrap();
        let (eigs, _) = sym_eigen(&ks.tau);
        for e in eigs {
            assert!(e >= -1e-8, "Bartlett tau matrix has eigenvalue {e}");
        }
    }

    #[test]
    fn pointwise_band_half_width_is_quantile_arithmetic() {
        let mut vk = Matrix::zeros(1);
        vk.set(0, 0, 0.25);
        let mut rng = rng_for(1, 0);
        let band =
            normal_band(&[0.5], &vk, 100, 0.95, BandMode::Pointwise, &mut rng).unwrap();
        let half = (band.points[0].hi - band.points[0].lo) / 2.0;
        let expected = normal_quantile(0.975) * 0.05;
        assert!((half - expected).abs() < 1e-12);
        assert!((half - 0.098).abs() < 1e-3);
    }

    #[test]
    fn zero_kernel_gives_zero_width_band() {
        let vk = Matrix::zeros(3);
        let mut rng = rng_for(2, 0);
        let band = normal_band(&[0.1, 0.2, 0.3], &vk, 50, 0.9, BandMode::Uniform, &mut rng)
            .unwrap();
        for p in band.points {
            assert_eq!(p.lo, p.hi);
        }
    }

    #[test]
    fn uniform_band_contains_pointwise_band() {
        let paths = sim_path(12, 30_000);
        let diffs = crate::estimator::difference_sequence(&paths).unwrap();
        let ks = build_kernel_set(&paths, &diffs, 6, 20, LagWeighting::Bartlett).unwrap();
        let est = crate::estimator::estimate(&paths, 6).unwrap();
        let mut rng = rng_for(3, 2);
        let pw = normal_band(&est.g_raw, &ks.v_kernel, est.n_used, 0.9, BandMode::Pointwise, &mut rng)
            .unwrap();
        let un = normal_band(&est.g_raw, &ks.v_kernel, est.n_used, 0.9, BandMode::Uniform, &mut rng)
            .unwrap();
        for (p, u) in pw.points.iter().zip(&un.points) {
            assert!(u.lo <= p.lo + 1e-12 && u.hi + 1e-12 >= p.hi, "uniform band narrower at x={}", p.x);
        }
    }

    #[test]
    fn flagged_entries_are_omitted_with_warning() {
        let mut vk = Matrix::zeros(2);
        vk.set(0, 0, 0.1);
        vk.set(1, 1, f64::NAN);
        let mut rng = rng_for(4, 0);
        let band =
            normal_band(&[0.3, 0.4], &vk, 100, 0.95, BandMode::Pointwise, &mut rng).unwrap();
        assert_eq!(band.points.len(), 1);
        assert_eq!(band.points[0].x, 1);
        assert_eq!(band.warnings.len(), 1);
    }
}
