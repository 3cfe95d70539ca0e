//! Discrete probability laws for arrival and service processes.
//!
//! Arrival laws live on {0, 1, 2, ...} and must put positive mass strictly
//! between 0 and 1 on zero for the difference-sequence method to apply;
//! service laws live on {1, 2, ...} because every customer occupies a
//! server for at least one slot.
//!
//! Unbounded parametric families are materialized up to the point where the
//! remaining tail mass drops below [`TAIL_EPS`]; sampling and cdf queries
//! then work off the stored table. A `DiscretePmf` is immutable after
//! construction and freely shareable across threads; all sampling state
//! lives in the caller's generator.

use rand::Rng;

use crate::error::Error;
use crate::Result;

/// Tail mass allowed beyond the stored truncation point.
pub const TAIL_EPS: f64 = 1e-12;

/// Hard cap on the number of materialized support points.
const MAX_SUPPORT: usize = 1 << 22;

/// Whether the support begins at 0 (arrival-style) or at 1 (service-style).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SupportKind {
    StartsAtZero,
    StartsAtOne,
}

/// Probability mass function on the nonnegative integers.
#[derive(Debug, Clone)]
pub struct DiscretePmf {
    /// Smallest support point with positive mass.
    first: u32,
    /// `probs[i]` is the mass at `first + i`.
    probs: Vec<f64>,
    /// `cum[i]` is the cdf at `first + i`.
    cum: Vec<f64>,
    /// Mass beyond the stored truncation point (0 for finite support).
    tail: f64,
    /// Human-readable family label used in provenance records.
    label: String,
    /// True when the family is known to have finite moments of all orders
    /// (finite support or exponentially decaying tail).
    all_moments_finite: bool,
    /// Exact mean where the family has a closed form, else the truncated sum.
    mean: f64,
}

impl DiscretePmf {
    fn from_table(first: u32, probs: Vec<f64>, tail: f64, label: String, mean: f64) -> Self {
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cum.push(acc.min(1.0));
        }
        DiscretePmf { first, probs, cum, tail, label, all_moments_finite: true, mean }
    }

    /// Poisson law with rate `lambda`, support starting at 0.
    pub fn poisson(lambda: f64) -> Result<Self> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "poisson rate must be positive, got {lambda}"
            )));
        }
        // Materialize in log space so large rates cannot underflow the
        // recurrence start.
        let mut probs = Vec::new();
        let mut remaining = 1.0;
        let ln_lambda = lambda.ln();
        for k in 0..MAX_SUPPORT {
            let kf = k as f64;
            let lp = kf * ln_lambda - lambda - libm::lgamma(kf + 1.0);
            let p = lp.exp();
            probs.push(p);
            remaining -= p;
            if remaining < TAIL_EPS && kf > lambda {
                break;
            }
        }
        let tail = remaining.max(0.0);
        if tail >= TAIL_EPS {
            return Err(Error::InvalidDistribution(format!(
                "poisson({lambda}) tail does not reach {TAIL_EPS} within {MAX_SUPPORT} points"
            )));
        }
        Ok(Self::from_table(0, probs, tail, format!("poisson:{lambda}"), lambda))
    }

    /// Geometric law on {1, 2, ...}: `P(X = k) = p (1-p)^(k-1)`.
    pub fn geometric(p: f64) -> Result<Self> {
        if p.is_nan() || p <= 0.0 || p >= 1.0 {
            return Err(Error::InvalidDistribution(format!(
                "geometric parameter must lie in (0,1), got {p}"
            )));
        }
        let mut probs = Vec::new();
        let mut mass = p;
        let mut remaining = 1.0;
        for _ in 0..MAX_SUPPORT {
            probs.push(mass);
            remaining -= mass;
            if remaining < TAIL_EPS {
                break;
            }
            mass *= 1.0 - p;
        }
        let tail = remaining.max(0.0);
        if tail >= TAIL_EPS {
            return Err(Error::InvalidDistribution(format!(
                "geometric({p}) tail does not reach {TAIL_EPS} within {MAX_SUPPORT} points"
            )));
        }
        Ok(Self::from_table(1, probs, tail, format!("geometric:{p}"), 1.0 / p))
    }

    /// Negative binomial on {0, 1, ...}: number of failures before the
    /// `r`-th success, `P(X = k) = C(k+r-1, k) p^r (1-p)^k`.
    pub fn neg_binomial(r: f64, p: f64) -> Result<Self> {
        if r <= 0.0 || !r.is_finite() || p.is_nan() || p <= 0.0 || p >= 1.0 {
            return Err(Error::InvalidDistribution(format!(
                "negative binomial needs r > 0 and p in (0,1), got r={r}, p={p}"
            )));
        }
        let ln_q = (1.0 - p).ln();
        let ln_p = p.ln();
        let lg_r = libm::lgamma(r);
        let mut probs = Vec::new();
        let mut remaining = 1.0;
        for k in 0..MAX_SUPPORT {
            let kf = k as f64;
            let lp = libm::lgamma(kf + r) - libm::lgamma(kf + 1.0) - lg_r
                + r * ln_p
                + kf * ln_q;
            let mass = lp.exp();
            probs.push(mass);
            remaining -= mass;
            if remaining < TAIL_EPS && kf > r * (1.0 - p) / p {
                break;
            }
        }
        let tail = remaining.max(0.0);
        if tail >= TAIL_EPS {
            return Err(Error::InvalidDistribution(format!(
                "negbin({r},{p}) tail does not reach {TAIL_EPS} within {MAX_SUPPORT} points"
            )));
        }
        let mean = r * (1.0 - p) / p;
        Ok(Self::from_table(0, probs, tail, format!("negbin:{r},{p}"), mean))
    }

    /// Degenerate law putting all mass on `s`.
    pub fn point_mass(s: u32) -> Self {
        Self::from_table(s, vec![1.0], 0.0, format!("point:{s}"), s as f64)
    }

    /// Finite-support law from `(value, probability)` pairs.
    ///
    /// Values must be distinct; probabilities must be nonnegative and sum
    /// to 1 within [`TAIL_EPS`].
    pub fn empirical(pairs: &[(u32, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidDistribution("empirical pmf has no entries".into()));
        }
        let mut sorted: Vec<(u32, f64)> = pairs.to_vec();
        sorted.sort_by_key(|&(v, _)| v);
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate support point {}",
                    w[0].0
                )));
            }
        }
        let mut total = 0.0;
        for &(v, p) in &sorted {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "probability {p} at value {v} is outside [0,1]"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > TAIL_EPS {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1 within {TAIL_EPS}"
            )));
        }
        // Trim zero-mass edges so `first` reflects the actual support.
        let lo = sorted.iter().position(|&(_, p)| p > 0.0).unwrap_or(0);
        let hi = sorted.iter().rposition(|&(_, p)| p > 0.0).unwrap_or(sorted.len() - 1);
        let sorted = &sorted[lo..=hi];

        let first = sorted[0].0;
        let last = sorted[sorted.len() - 1].0;
        let mut probs = vec![0.0; (last - first + 1) as usize];
        let mut mean = 0.0;
        for &(v, p) in sorted {
            probs[(v - first) as usize] = p;
            mean += v as f64 * p;
        }
        Ok(Self::from_table(first, probs, 0.0, format!("empirical:{}pts", sorted.len()), mean))
    }

    /// Load an empirical pmf from CSV text with header `value,probability`.
    pub fn empirical_from_csv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "value,probability" => {}
            Some((_, header)) => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header 'value,probability', got '{header}'"),
                })
            }
            None => {
                return Err(Error::Parse { line: 1, message: "empty file".into() });
            }
        }
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let (v, p) = match (fields.next(), fields.next(), fields.next()) {
                (Some(v), Some(p), None) => (v.trim(), p.trim()),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "expected exactly two comma-separated fields".into(),
                    })
                }
            };
            let value: u32 = v.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("value '{v}' is not a nonnegative integer"),
            })?;
            let prob: f64 = p.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("probability '{p}' is not a number"),
            })?;
            pairs.push((value, prob));
        }
        Self::empirical(&pairs)
    }

    /// Support classification derived from the smallest mass point.
    pub fn support_kind(&self) -> SupportKind {
        if self.first == 0 {
            SupportKind::StartsAtZero
        } else {
            SupportKind::StartsAtOne
        }
    }

    /// Smallest support point.
    pub fn support_min(&self) -> u32 {
        self.first
    }

    /// Largest stored support point (truncation point for unbounded laws).
    pub fn support_max(&self) -> u32 {
        self.first + (self.probs.len() - 1) as u32
    }

    /// Mass beyond the stored truncation point.
    pub fn truncation_tail(&self) -> f64 {
        self.tail
    }

    /// Family label for provenance records.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Mean of the law.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `P(X = 0)`.
    pub fn zero_prob(&self) -> f64 {
        self.mass(0)
    }

    /// Mass at `x`.
    pub fn mass(&self, x: u32) -> f64 {
        if x < self.first {
            return 0.0;
        }
        let i = (x - self.first) as usize;
        if i < self.probs.len() {
            self.probs[i]
        } else {
            0.0
        }
    }

    /// Cdf at `x`; nondecreasing and tending to 1.
    pub fn cdf(&self, x: u32) -> f64 {
        if x < self.first {
            return 0.0;
        }
        let i = (x - self.first) as usize;
        if i < self.cum.len() {
            self.cum[i]
        } else {
            1.0
        }
    }

    /// `(mass, cdf)` at `x`.
    pub fn pmf_cdf(&self, x: u32) -> (f64, f64) {
        (self.mass(x), self.cdf(x))
    }

    /// Cdf evaluated on 1..=x_max as a vector (`out[i] = cdf(i + 1)`).
    pub fn cdf_vec(&self, x_max: usize) -> Vec<f64> {
        (1..=x_max as u32).map(|x| self.cdf(x)).collect()
    }

    /// One inverse-cdf draw.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        // partition_point returns the number of cum entries <= u, i.e. the
        // first index with cdf > u. Draws landing in the truncated tail
        // (probability below TAIL_EPS) clamp to the last stored point.
        let idx = self.cum.partition_point(|&c| c <= u).min(self.probs.len() - 1);
        self.first + idx as u32
    }

    /// `count` i.i.d. draws; deterministic given the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<u32> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }

    /// Advisory check of the tail-decay condition behind the limit theory:
    /// returns the partial sum of sqrt(1 - G(n)) up to `horizon` and a hint
    /// that the full series converges (true when the law has finite moments
    /// of order 2 + eps, which holds for every family constructible here).
    pub fn tail_decay_check(&self, horizon: u32) -> TailCheck {
        assert!(horizon >= 1, "horizon must be at least 1");
        let mut partial_sum = 0.0;
        for n in 1..=horizon {
            partial_sum += (1.0 - self.cdf(n)).max(0.0).sqrt();
        }
        TailCheck { partial_sum, finite_moment_hint: self.all_moments_finite }
    }
}

/// Result of the advisory tail-decay check.
#[derive(Debug, Clone, Copy)]
pub struct TailCheck {
    /// Partial sum of sqrt(1 - G(n)) for n = 1..=horizon.
    pub partial_sum: f64,
    /// True when a finite (2+eps)-moment is detectable from the family.
    pub finite_moment_hint: bool,
}

/// Parse a model-spec string such as `poisson:1`, `geometric:0.5`,
/// `negbin:2,0.3`, `point:4` or `empirical:<csv-path>`.
pub fn parse_model_spec(spec: &str) -> Result<DiscretePmf> {
    let (family, args) = spec
        .split_once(':')
        .ok_or_else(|| Error::InvalidDistribution(format!("model spec '{spec}' lacks ':'")))?;
    let parse_f64 = |s: &str| -> Result<f64> {
        s.trim().parse().map_err(|_| {
            Error::InvalidDistribution(format!("'{s}' is not a number in spec '{spec}'"))
        })
    };
    match family {
        "poisson" => DiscretePmf::poisson(parse_f64(args)?),
        "geometric" => DiscretePmf::geometric(parse_f64(args)?),
        "negbin" => {
            let (r, p) = args.split_once(',').ok_or_else(|| {
                Error::InvalidDistribution(format!("negbin spec '{spec}' needs 'r,p'"))
            })?;
            DiscretePmf::neg_binomial(parse_f64(r)?, parse_f64(p)?)
        }
        "point" => {
            let s: u32 = args.trim().parse().map_err(|_| {
                Error::InvalidDistribution(format!(
                    "'{args}' is not a nonnegative integer in spec '{spec}'"
                ))
            })?;
            Ok(DiscretePmf::point_mass(s))
        }
        "empirical" => {
            let text = std::fs::read_to_string(args.trim())?;
            DiscretePmf::empirical_from_csv(&text)
        }
        other => Err(Error::InvalidDistribution(format!("unknown family '{other}'"))),
    }
}
