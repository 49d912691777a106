//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by generation, simulation, estimation and analysis routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A configuration or specification value is out of its documented domain.
    #[error("invalid {context}: {reason}")]
    InvalidParameter {
        /// Which input was rejected, e.g. `"trajectory spec"` or `"noise model"`.
        context: &'static str,
        reason: String,
    },

    /// An input series was empty or shorter than the operation requires.
    #[error("{context}: need at least {required} samples, got {actual}")]
    TooFewSamples {
        context: &'static str,
        required: usize,
        actual: usize,
    },

    /// Timestamps must be strictly increasing within a series.
    #[error("timestamps not strictly increasing at index {index} (t[{index}] = {timestamp})")]
    NonMonotoneTimestamps { index: usize, timestamp: f64 },

    /// Two series that must share a time base disagree.
    #[error("timestamp mismatch at index {index}: {left} vs {right}")]
    TimestampMismatch { index: usize, left: f64, right: f64 },

    /// Curvature is undefined where the speed vanishes.
    #[error("curvature undefined at sample {index}: zero speed")]
    ZeroSpeed { index: usize },

    /// The motion carries no usable scale information.
    #[error(
        "scale unobservable: total scale information {information:.6e} is below threshold {threshold:.1e}"
    )]
    ScaleUnobservable { information: f64, threshold: f64 },

    /// The iterative estimator failed to converge.
    #[error("estimator did not converge after {iterations} iterations (last step {last_step:.3e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    /// Regression on these inputs is degenerate.
    #[error("degenerate regression: {reason}")]
    DegenerateRegression { reason: String },

    /// Requested averaging time exceeds what the record supports.
    #[error(
        "too few samples for tau = {requested_tau} s: maximum feasible tau is {max_feasible_tau} s"
    )]
    TauTooLong {
        requested_tau: f64,
        max_feasible_tau: f64,
    },

    /// No region of the deviation curve matches the requested slope.
    #[error("no slope region found: {targets}")]
    MissingSlopeRegion { targets: String },

    /// The Gramian (or another matrix input) is unusable.
    #[error("degenerate matrix: {reason}")]
    DegenerateMatrix { reason: String },

    /// A text record could not be parsed.
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    /// An underlying I/O operation failed.
    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(context: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            context,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            reason: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
