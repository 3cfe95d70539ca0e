//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by estimation, simulation and resampling routines.
///
/// Each variant carries a stable machine-readable code (see [`Error::code`])
/// so that front ends can report module-qualified failures on one line.
#[derive(Debug, Error)]
pub enum Error {
    /// The observed path contains no slot with a positive arrival count.
    #[error("no arrivals observed")]
    NoArrivals,

    /// No departures fall inside the slots where the difference sequence
    /// is defined, so the ratio estimator has a zero denominator.
    #[error("no departures observed")]
    NoDepartures,

    /// The zero-arrival frequency is 0 or 1, so `c^-x` is meaningless.
    #[error("degenerate arrival-zero frequency (c_hat = {0})")]
    DegenerateCHat(f64),

    /// Every redraw of a bootstrap replicate produced zero total departures.
    #[error("degenerate bootstrap replicate (zero departures after {attempts} attempts)")]
    DegenerateReplicate { attempts: usize },

    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A distribution could not be constructed from the given parameters.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// Malformed data file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable module-qualified code for machine-parsable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NoArrivals => "estimator.no_arrivals",
            Error::NoDepartures => "estimator.no_departures",
            Error::DegenerateCHat(_) => "estimator.degenerate_c",
            Error::DegenerateReplicate { .. } => "bootstrap.degenerate_replicate",
            Error::InvalidInput(_) => "input.invalid",
            Error::InvalidDistribution(_) => "distributions.invalid",
            Error::Parse { .. } => "ingest.parse",
            Error::Io(_) => "io",
        }
    }
}
