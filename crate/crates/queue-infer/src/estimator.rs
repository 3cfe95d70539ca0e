//! Estimators built on the sequence of differences.
//!
//! `Z(t)` is the number of slots between `t` and the most recent strictly
//! earlier slot with a positive arrival count. It satisfies the recursion
//! `Z(t) = Z(t-1) * 1{A(t-1) = 0} + 1` and is well defined from one slot
//! after the first observed arrival onward; earlier slots are excluded from
//! every sum because the infinite past is not observable.
//!
//! From the observed counts the module estimates
//!
//! - `c_hat`: the fraction of zero-arrival slots,
//! - `h_hat(x)`: the departure-weighted cdf of `Z`,
//! - `g_raw(x) = 1 - c_hat^-x (1 - h_hat(x))`: the plug-in service-law
//!   estimate, which may leave `[0, 1]` in finite samples,
//! - `g_mono`: its isotonic projection clipped to `[0, 1]`.
//!
//! The exact forward map [`h_from_g`] doubles as the oracle for every
//! consistency check: feeding exact `(G, c)` through the inverse map is the
//! identity.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::simulator::CountPaths;
use crate::Result;

/// Guard on `c_hat^x`: beyond the largest `x` with `c_hat^x > X_CAP_EPS`
/// the inversion amplifies noise by more than 1e12 and is cut off.
pub const X_CAP_EPS: f64 = 1e-12;

/// Per-slot distances to the most recent earlier arrival.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceSequence {
    /// `values[t-1]` is `Z(t)`; entries before `valid_from` are 0 and
    /// meaningless.
    values: Vec<u32>,
    /// First 1-based slot with a well-defined distance (one past the first
    /// observed arrival).
    valid_from: usize,
}

impl DifferenceSequence {
    /// Assemble from parts, checking the recursion's structural invariants.
    pub fn from_parts(values: Vec<u32>, valid_from: usize) -> Result<Self> {
        if valid_from < 2 || valid_from > values.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "valid_from must lie in 2..=n+1, got {valid_from}"
            )));
        }
        if values[valid_from - 1..].contains(&0) {
            return Err(Error::InvalidInput(
                "difference values must be >= 1 on the valid range".into(),
            ));
        }
        Ok(DifferenceSequence { values, valid_from })
    }

    /// `Z(t)` for a 1-based slot `t >= valid_from`.
    pub fn value_at(&self, t: usize) -> u32 {
        debug_assert!(t >= self.valid_from && t <= self.values.len());
        self.values[t - 1]
    }

    pub fn valid_from(&self) -> usize {
        self.valid_from
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of valid slots `valid_from..=n`.
    pub fn n_valid(&self) -> usize {
        self.values.len() + 1 - self.valid_from
    }

    /// Distances over the valid range, in slot order.
    pub fn valid_values(&self) -> &[u32] {
        &self.values[self.valid_from - 1..]
    }
}

/// Compute the difference sequence of a count path.
pub fn difference_sequence(paths: &CountPaths) -> Result<DifferenceSequence> {
    let n = paths.len();
    if n < 2 {
        return Err(Error::InvalidInput("difference sequence needs n >= 2".into()));
    }
    let first_arrival = paths
        .arrivals
        .iter()
        .position(|&a| a > 0)
        .ok_or(Error::NoArrivals)?
        + 1;
    let valid_from = first_arrival + 1;
    let mut values = vec![0u32; n];
    let mut prev = 0u32;
    for t in valid_from..=n {
        let z = if paths.arrivals[t - 2] > 0 { 1 } else { prev + 1 };
        values[t - 1] = z;
        prev = z;
    }
    // A trailing first arrival leaves an empty valid range; downstream sums
    // then fail with a zero-departure error rather than here.
    DifferenceSequence::from_parts(values, valid_from)
}

/// Fraction of zero-arrival slots over the whole path.
pub fn estimate_c(paths: &CountPaths) -> f64 {
    let zeros = paths.arrivals.iter().filter(|&&a| a == 0).count();
    zeros as f64 / paths.len() as f64
}

/// Departure-weighted cdf of the difference sequence at `x = 1..=x_max`,
/// summing over the valid slots only.
pub fn estimate_h(
    paths: &CountPaths,
    diffs: &DifferenceSequence,
    x_max: usize,
) -> Result<Vec<f64>> {
    if paths.len() != diffs.len() {
        return Err(Error::InvalidInput(
            "difference sequence does not match path length".into(),
        ));
    }
    if x_max == 0 {
        return Err(Error::InvalidInput("x_max must be >= 1".into()));
    }
    let mut total: u64 = 0;
    // weight[x] collects departures with Z = x; distances beyond x_max all
    // land in the last cell, which only ever feeds the cdf tail at 1.
    let mut weight = vec![0u64; x_max + 2];
    for t in diffs.valid_from()..=paths.len() {
        let d = paths.departures[t - 1] as u64;
        if d == 0 {
            continue;
        }
        total += d;
        let z = diffs.value_at(t) as usize;
        weight[z.min(x_max + 1)] += d;
    }
    if total == 0 {
        return Err(Error::NoDepartures);
    }
    let mut h = Vec::with_capacity(x_max);
    let mut acc = 0u64;
    for w in &weight[1..=x_max] {
        acc += w;
        h.push(acc as f64 / total as f64);
    }
    Ok(h)
}

/// Largest `x >= 1` with `c^x > X_CAP_EPS`, or 0 when even `x = 1` fails.
pub fn x_cap_for(c: f64) -> usize {
    let mut x = 0usize;
    while c.powi(x as i32 + 1) > X_CAP_EPS {
        x += 1;
        if x > 1_000_000 {
            break;
        }
    }
    x
}

/// Invert the link `H(x) = 1 - c^x (1 - G(x))` on a cdf estimate.
///
/// Returns `(raw, mono)`: the raw inversion, which may exit `[0, 1]`, and
/// its isotonic projection clipped to `[0, 1]`. Output length is
/// `min(x_max, x_cap)` where the cap guards against `c_hat^-x` blow-up.
pub fn estimate_g(h_hat: &[f64], c_hat: f64, x_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(c_hat > 0.0 && c_hat < 1.0) {
        return Err(Error::DegenerateCHat(c_hat));
    }
    let x_eff = x_max.min(h_hat.len()).min(x_cap_for(c_hat));
    let mut raw = Vec::with_capacity(x_eff);
    for x in 1..=x_eff {
        let cx = c_hat.powi(x as i32);
        raw.push(1.0 - (1.0 - h_hat[x - 1]) / cx);
    }
    let mono: Vec<f64> = isotonic_nondecreasing(&raw)
        .into_iter()
        .map(|g| g.clamp(0.0, 1.0))
        .collect();
    Ok((raw, mono))
}

/// Exact forward map from a service cdf and zero-arrival probability to the
/// departure-weighted distance cdf: `H(x) = 1 - c^x (1 - G(x))`.
pub fn h_from_g(g_cdf: &[f64], c: f64) -> Vec<f64> {
    assert!(c > 0.0 && c < 1.0, "c must lie in (0,1), got {c}");
    g_cdf
        .iter()
        .enumerate()
        .map(|(i, &g)| 1.0 - c.powi(i as i32 + 1) * (1.0 - g))
        .collect()
}

/// L2 projection onto the nondecreasing cone (pool adjacent violators).
pub fn isotonic_nondecreasing(xs: &[f64]) -> Vec<f64> {
    // Blocks of (mean, weight) merged whenever a descent appears.
    let mut means: Vec<f64> = Vec::with_capacity(xs.len());
    let mut weights: Vec<f64> = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut m = x;
        let mut w = 1.0;
        while let Some(&prev) = means.last() {
            if prev <= m {
                break;
            }
            let pw = weights.pop().unwrap();
            means.pop();
            m = (m * w + prev * pw) / (w + pw);
            w += pw;
        }
        means.push(m);
        weights.push(w);
    }
    let mut out = Vec::with_capacity(xs.len());
    for (m, w) in means.iter().zip(&weights) {
        for _ in 0..*w as usize {
            out.push(*m);
        }
    }
    out
}

/// Full estimation output for one count path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub c_hat: f64,
    pub x_max: usize,
    /// Effective evaluation bound after the `c_hat^x` guard.
    pub x_cap: usize,
    pub h_hat: Vec<f64>,
    pub g_raw: Vec<f64>,
    pub g_mono: Vec<f64>,
    pub n_used: usize,
    #[serde(rename = "sum_D")]
    pub sum_d: u64,
    pub warnings: Vec<String>,
}

/// Run the whole pipeline on one path: difference sequence, `c_hat`,
/// `h_hat` on `1..=x_max` and both service-law estimates.
pub fn estimate(paths: &CountPaths, x_max: usize) -> Result<EstimateSet> {
    let diffs = difference_sequence(paths)?;
    let c_hat = estimate_c(paths);
    if c_hat == 0.0 || c_hat == 1.0 {
        return Err(Error::DegenerateCHat(c_hat));
    }
    let h_hat = estimate_h(paths, &diffs, x_max)?;
    let (g_raw, g_mono) = estimate_g(&h_hat, c_hat, x_max)?;
    let x_cap = g_raw.len();
    let mut warnings = Vec::new();
    if x_cap < x_max {
        warnings.push(format!(
            "service-law estimate truncated at x = {x_cap}: c_hat^x below {X_CAP_EPS} beyond"
        ));
    }
    let sum_d: u64 = (diffs.valid_from()..=paths.len())
        .map(|t| paths.departures[t - 1] as u64)
        .sum();
    Ok(EstimateSet {
        c_hat,
        x_max,
        x_cap,
        h_hat,
        g_raw,
        g_mono,
        n_used: diffs.n_valid(),
        sum_d,
        warnings,
    })
}
