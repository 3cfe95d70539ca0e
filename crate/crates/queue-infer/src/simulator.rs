//! Simulation of infinite-server queues.
//!
//! [`simulate_counts`] produces per-slot arrival/departure counts of a
//! discrete-time batch-arrival infinite-server queue in stationary regime:
//! the run is extended `burn_in` slots into the past so that customers from
//! before the observation window contribute their departures, emulating a
//! system started in the infinite past up to a truncation whose bias is
//! controlled by the burn-in choice.
//!
//! [`simulate_continuous_trace`] generates arrival/departure epochs of a
//! continuous-time Poisson-arrival infinite-server system on `[0, horizon)`,
//! and [`discretize`] bins such a trace onto a slot grid of width `h` using
//! half-open bins `[h(i-1), h i)`.

use std::io::Write;

use rand::Rng;

use crate::distributions::{DiscretePmf, SupportKind};
use crate::error::Error;
use crate::seeding::{rng_for, STREAM_SIMULATION};
use crate::Result;

/// Aligned arrival/departure count series for slots `1..=n`.
///
/// Slot `t` is stored at index `t - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPaths {
    pub arrivals: Vec<u32>,
    pub departures: Vec<u32>,
    pub meta: PathMeta,
}

/// Provenance and accounting attached to a count path.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PathMeta {
    pub seed: Option<u64>,
    pub burn_in: usize,
    pub arrival_model: Option<String>,
    pub service_model: Option<String>,
    /// Departures scheduled after the observation window (still in service
    /// at slot `n`).
    pub dropped_after_window: u64,
    /// Burn-in departures that occurred before slot 1.
    pub departed_before_window: u64,
    /// Total arrivals over the extended run including burn-in slots.
    pub total_arrivals_extended: u64,
    pub source: Option<String>,
}

impl CountPaths {
    /// Validating constructor; both series must be nonempty and equally long.
    pub fn new(arrivals: Vec<u32>, departures: Vec<u32>, meta: PathMeta) -> Result<Self> {
        if arrivals.is_empty() {
            return Err(Error::InvalidInput("count path must have n >= 1".into()));
        }
        if arrivals.len() != departures.len() {
            return Err(Error::InvalidInput(format!(
                "arrival and departure series differ in length: {} vs {}",
                arrivals.len(),
                departures.len()
            )));
        }
        Ok(CountPaths { arrivals, departures, meta })
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// Write as CSV with header `t,A,D`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,A,D")?;
        for (i, (a, d)) in self.arrivals.iter().zip(&self.departures).enumerate() {
            writeln!(out, "{},{},{}", i + 1, a, d)?;
        }
        Ok(())
    }
}

/// Configuration for a discrete simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    /// Observation window length in slots.
    pub n: usize,
    /// Burn-in slots before the window; `None` selects the default rule
    /// (smallest W with `1 - G(W) < 1e-6`, capped at `1e6`).
    pub burn_in: Option<usize>,
    pub seed: u64,
}

/// Default burn-in: smallest `W` with `1 - G(W) < 1e-6`, capped at `1e6`.
pub fn default_burn_in(service: &DiscretePmf) -> usize {
    const CAP: usize = 1_000_000;
    for w in 1..=service.support_max() as usize {
        if 1.0 - service.cdf(w as u32) < 1e-6 {
            return w.min(CAP);
        }
    }
    (service.support_max() as usize + 1).min(CAP)
}

/// Simulate per-slot arrival/departure counts over slots `1..=n`.
///
/// Each slot of the extended run `1-burn_in ..= n` draws a batch size from
/// the arrival law; every customer in the batch draws an independent service
/// time and departs that many slots later. Departures landing outside the
/// window are counted in the path metadata instead of the series.
pub fn simulate_counts(
    arrival: &DiscretePmf,
    service: &DiscretePmf,
    cfg: &SimConfig,
) -> Result<CountPaths> {
    if cfg.n == 0 {
        return Err(Error::InvalidInput("simulation window must have n >= 1".into()));
    }
    let p0 = arrival.zero_prob();
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidInput(format!(
            "arrival law must satisfy 0 < P(0) < 1, got P(0) = {p0}"
        )));
    }
    if service.support_kind() != SupportKind::StartsAtOne {
        return Err(Error::InvalidInput(
            "service law must have no mass at 0 (support starts at 1)".into(),
        ));
    }

    let burn_in = cfg.burn_in.unwrap_or_else(|| default_burn_in(service));
    let n = cfg.n;
    let mut rng = rng_for(cfg.seed, STREAM_SIMULATION);

    let mut arrivals = vec![0u32; n];
    let mut departures = vec![0u32; n];
    let mut meta = PathMeta {
        seed: Some(cfg.seed),
        burn_in,
        arrival_model: Some(arrival.label().to_string()),
        service_model: Some(service.label().to_string()),
        ..PathMeta::default()
    };

    // Slot t runs over 1-burn_in ..= n; offset keeps the loop in unsigned
    // arithmetic: t = i as i64 - burn_in as i64 + 1.
    for i in 0..burn_in + n {
        let t = i as i64 - burn_in as i64 + 1;
        let batch = arrival.sample_one(&mut rng);
        meta.total_arrivals_extended += batch as u64;
        if t >= 1 {
            arrivals[(t - 1) as usize] = batch;
        }
        for _ in 0..batch {
            let s = service.sample_one(&mut rng) as i64;
            let dep = t + s;
            if dep < 1 {
                meta.departed_before_window += 1;
            } else if dep as usize <= n {
                departures[(dep - 1) as usize] += 1;
            } else {
                meta.dropped_after_window += 1;
            }
        }
    }

    CountPaths::new(arrivals, departures, meta)
}

/// Continuous-time service samplers needed by the trace simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuousService {
    Exponential { rate: f64 },
    Deterministic { duration: f64 },
}

impl ContinuousService {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            // Inverse transform; u in [0,1) keeps the logarithm finite.
            ContinuousService::Exponential { rate } => {
                let u: f64 = rng.random();
                -(1.0 - u).ln() / rate
            }
            ContinuousService::Deterministic { duration } => duration,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ContinuousService::Exponential { rate } => format!("exp:{rate}"),
            ContinuousService::Deterministic { duration } => format!("point:{duration}"),
        }
    }
}

/// Event trace of a continuous-time infinite-server run on `[0, horizon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousTrace {
    /// Sorted arrival epochs.
    pub arrival_times: Vec<f64>,
    /// Sorted departure epochs; the arrival/departure pairing is not kept.
    pub departure_times: Vec<f64>,
    pub horizon: f64,
    /// Departures falling at or beyond the horizon, dropped from the trace.
    pub dropped_departures: u64,
}

/// Simulate a Poisson(lambda)-arrival infinite-server system on
/// `[0, horizon)`; every arrival receives one departure at
/// `arrival + service`. Departures at or beyond the horizon are dropped and
/// counted.
pub fn simulate_continuous_trace(
    lambda: f64,
    service: &ContinuousService,
    horizon: f64,
    seed: u64,
) -> Result<ContinuousTrace> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    if horizon <= 0.0 || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    match *service {
        ContinuousService::Exponential { rate } if rate.is_nan() || rate <= 0.0 => {
            return Err(Error::InvalidInput(format!("service rate must be positive, got {rate}")));
        }
        ContinuousService::Deterministic { duration } if duration.is_nan() || duration <= 0.0 => {
            return Err(Error::InvalidInput(format!(
                "service duration must be positive, got {duration}"
            )));
        }
        _ => {}
    }

    let mut rng = rng_for(seed, STREAM_SIMULATION);
    let mut arrival_times = Vec::new();
    let mut departure_times = Vec::new();
    let mut dropped = 0u64;
    let mut t = 0.0f64;
    loop {
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / lambda;
        if t >= horizon {
            break;
        }
        arrival_times.push(t);
        let dep = t + service.sample(&mut rng);
        if dep < horizon {
            departure_times.push(dep);
        } else {
            dropped += 1;
        }
    }
    departure_times.sort_by(f64::total_cmp);
    Ok(ContinuousTrace { arrival_times, departure_times, horizon, dropped_departures: dropped })
}

impl ContinuousTrace {
    /// Validating constructor for ingested traces: times must be finite,
    /// sorted series are produced internally, and every time must lie in
    /// `[0, horizon)` so the half-open binning is well defined.
    pub fn new(
        mut arrival_times: Vec<f64>,
        mut departure_times: Vec<f64>,
        horizon: f64,
    ) -> Result<Self> {
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        for &t in arrival_times.iter().chain(&departure_times) {
            if !t.is_finite() || t < 0.0 || t >= horizon {
                return Err(Error::InvalidInput(format!(
                    "event time {t} outside [0, horizon)"
                )));
            }
        }
        arrival_times.sort_by(f64::total_cmp);
        departure_times.sort_by(f64::total_cmp);
        Ok(ContinuousTrace { arrival_times, departure_times, horizon, dropped_departures: 0 })
    }

    /// Write as CSV with header `kind,time`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kind,time")?;
        for t in &self.arrival_times {
            writeln!(out, "arrival,{t}")?;
        }
        for t in &self.departure_times {
            writeln!(out, "departure,{t}")?;
        }
        Ok(())
    }
}

/// Bin a continuous trace onto the slot grid of width `h`: slot `i` collects
/// events with time in `[h(i-1), h i)`, so an event exactly on a boundary
/// belongs to the following slot.
pub fn discretize(trace: &ContinuousTrace, h: f64) -> Result<CountPaths> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidInput(format!("step size must be positive, got {h}")));
    }
    let n = (trace.horizon / h).ceil() as usize;
    if n == 0 {
        return Err(Error::InvalidInput("horizon shorter than one slot".into()));
    }
    let mut arrivals = vec![0u32; n];
    let mut departures = vec![0u32; n];
    // Times are strictly below the horizon, so mathematically bin <= n; the
    // clamp only absorbs directed rounding of t/h at the last boundary.
    let bin = |t: f64| -> usize { ((t / h).floor() as usize).min(n - 1) };
    for &t in &trace.arrival_times {
        arrivals[bin(t)] += 1;
    }
    for &t in &trace.departure_times {
        departures[bin(t)] += 1;
    }
    debug_assert_eq!(
        arrivals.iter().map(|&a| a as u64).sum::<u64>(),
        trace.arrival_times.len() as u64
    );
    let meta = PathMeta {
        dropped_after_window: trace.dropped_departures,
        source: Some(format!("discretized(h={h})")),
        ..PathMeta::default()
    };
    CountPaths::new(arrivals, departures, meta)
}
