//! Estimation of the service-time distribution of a discrete-time
//! infinite-server queue observed only through per-slot arrival and
//! departure counts.
//!
//! The queue admits batch arrivals `A(t)` in every time slot; each customer
//! independently occupies a server for a whole number of slots drawn from an
//! unknown service law `G` and then leaves, producing the departure counts
//! `D(t)`. Customers are indistinguishable, so no departure can be matched
//! to its arrival. Everything this crate computes is a function of the two
//! count series alone.
//!
//! The estimation route goes through the *sequence of differences* `Z(t)`,
//! the number of slots since the most recent strictly earlier arrival. The
//! departure-weighted distribution of `Z`,
//!
//! ```text
//! H(x) = E[D(0) 1{Z(0) <= x}] / E[D(0)],
//! ```
//!
//! is directly estimable and linked to the service law by
//! `H(x) = 1 - c^x (1 - G(x))` with `c = P(A(0) = 0)`, which inverts to a
//! plug-in estimator of `G`. The crate provides:
//!
//! - [`distributions`]: discrete laws (Poisson, geometric, negative
//!   binomial, point mass, empirical) with reproducible sampling;
//! - [`simulator`]: a stationary-regime count-path simulator plus a
//!   continuous-time infinite-server simulator and a binning step that
//!   discretizes event traces onto a slot grid;
//! - [`estimator`]: the difference sequence, the estimators of `c`, `H`
//!   and `G`, and the exact forward map from `G` to `H`;
//! - [`asymptotics`]: long-run (HAC) covariance estimation for the
//!   estimator's influence series, assembly of the Gaussian limit
//!   covariance kernel, and normal-theory confidence bands;
//! - [`bootstrap`]: moving-block bootstrap replication of the estimators
//!   with percentile confidence intervals and a coverage harness.
//!
//! All randomness flows from explicit 64-bit seeds through the stream
//! scheme in [`seeding`]; identical inputs produce identical outputs.

pub mod asymptotics;
pub mod bootstrap;
pub mod distributions;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod seeding;
pub mod simulator;
pub mod stats;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
