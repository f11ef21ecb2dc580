use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {what} ({requested} > {limit})")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Lanczos did not converge after {iterations} iterations (best residual {best_residual:.3e})")]
    Convergence {
        iterations: usize,
        best_residual: f64,
    },

    #[error("spectrum is degenerate at the bottom (gap {gap:.3e})")]
    Degenerate { gap: f64 },

    #[error("numerical divergence during evolution stage {stage}")]
    NumericalDivergence { stage: usize },

    #[error("Metropolis chain saw only zero-weight configurations")]
    SamplingDegeneracy,

    #[error("requested {requested} components but only {available} distinct configurations were sampled")]
    InsufficientSupport { requested: usize, available: usize },

    #[error("post-selection success probability vanished (p = {p:.3e})")]
    VanishingSuccess { p: f64 },

    #[error("fit failed: {reason} (residual {residual:.3e})")]
    Fit { reason: String, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}
