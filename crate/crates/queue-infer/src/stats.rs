//! Small numerical toolbox: normal distribution functions, a one-sample
//! Kolmogorov-Smirnov test and a chi-square uniformity check.
//!
//! Everything here is standard double-precision material kept in-crate so
//! the statistical core has no heavyweight dependencies.

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile function.
///
/// Rational initial guess (Acklam) polished with one Halley step against
/// [`normal_cdf`]; absolute error is far below 1e-12 over (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile requires p in (0,1), got {p}");

    // Acklam's piecewise rational approximation.
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // One Halley step: f(x) = Phi(x) - p.
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// One-sample Kolmogorov-Smirnov statistic `sup_x |F_n(x) - F(x)|`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!sample.is_empty(), "empty sample");
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = (f - i as f64 / n).abs();
        let hi = ((i + 1) as f64 / n - f).abs();
        d = d.max(lo).max(hi);
    }
    d
}

/// Asymptotic p-value of the Kolmogorov-Smirnov statistic `d` at sample
/// size `n`, with Stephens' finite-sample adjustment of the argument.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    kolmogorov_tail(lambda)
}

/// Tail probability `P(K > lambda)` of the Kolmogorov distribution.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Chi-square goodness-of-fit p-value for observed counts against expected
/// counts, using the Wilson-Hilferty normal approximation of the chi-square
/// distribution (accurate for the moderate-to-large df used here).
pub fn chi_square_pvalue(observed: &[u64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    assert!(observed.len() >= 2, "need at least two cells");
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        assert!(e > 0.0, "expected cell count must be positive");
        let diff = o as f64 - e;
        stat += diff * diff / e;
    }
    let df = (observed.len() - 1) as f64;
    // Wilson-Hilferty: (X2/df)^(1/3) is approximately normal.
    let z = ((stat / df).powf(1.0 / 3.0) - (1.0 - 2.0 / (9.0 * df))) / (2.0 / (9.0 * df)).sqrt();
    1.0 - normal_cdf(z)
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population-normalized variance (divide by `n`).
pub fn variance_population(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Linearly interpolated quantile of an unsorted sample, `q` in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty());
    assert!((0.0..=1.0).contains(&q), "quantile level out of range: {q}");
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-12);
    }

    #[test]
    fn normal_quantile_reference_values() {
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-10);
        assert!((normal_quantile(0.5)).abs() < 1e-12);
        assert!((normal_quantile(0.00135) - (-3.0000233)).abs() < 1e-4);
    }

    #[test]
    fn quantile_and_cdf_roundtrip() {
        for &p in &[1e-6, 0.01, 0.3, 0.5, 0.9, 0.995, 1.0 - 1e-9] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-12, "roundtrip failed at p={p}");
        }
    }

    #[test]
    fn ks_accepts_its_own_distribution_and_rejects_shift() {
        let mut rng = crate::seeding::rng_for(42, 0);
        let normals: Vec<f64> = (0..400)
            .map(|_| {
                // Box-Muller from two uniforms; determinism is all that matters.
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let d = ks_statistic(&normals, normal_cdf);
        assert!(ks_pvalue(d, normals.len()) > 0.01);

        let shifted: Vec<f64> = normals.iter().map(|x| x + 1.0).collect();
        let d = ks_statistic(&shifted, normal_cdf);
        assert!(ks_pvalue(d, shifted.len()) < 1e-6);
    }

    #[test]
    fn chi_square_flags_nonuniform_counts() {
        let observed = vec![100u64, 100, 100, 100];
        let expected = vec![100.0; 4];
        assert!(chi_square_pvalue(&observed, &expected) > 0.5);

        let skewed = vec![200u64, 60, 70, 70];
        assert!(chi_square_pvalue(&skewed, &expected) < 1e-6);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert!((quantile(&xs, 0.5) - 2.5).abs() < 1e-15);
    }
}
