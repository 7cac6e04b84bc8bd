use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the loss calculus, solvers and experiment harness.
#[derive(Debug, Error)]
pub enum CpeError {
    /// A prediction or probability fell outside the set it must live in.
    #[error("{value} is outside the domain {domain}")]
    Domain { value: f64, domain: String },

    /// The operation needs a strictly proper composite loss (a usable inverse link).
    #[error("loss `{loss}` does not support {operation}: no strictly proper link")]
    UnsupportedLoss { loss: String, operation: &'static str },

    /// Iterative minimization stopped short of its tolerance.
    #[error("{what} did not converge after {iterations} iterations (achieved {achieved:.3e}, target {target:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        achieved: f64,
        target: f64,
    },

    /// A numeric consistency condition failed (e.g. a large negative excess risk).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A one-dimensional search met a conditional risk that is not unimodal.
    #[error("conditional risk of `{loss}` at eta={eta} is not unimodal")]
    NotUnimodal { loss: String, eta: f64 },

    /// The weighted design matrix is singular.
    #[error("design matrix is rank deficient (dimension {dim}, pivot {pivot:.3e})")]
    RankDeficient { dim: usize, pivot: f64 },

    /// Invalid input: unknown names, bad parameters, malformed problems.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl CpeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CpeError::Invalid(msg.into())
    }

    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            CpeError::Invalid(_) | CpeError::Domain { .. } | CpeError::UnsupportedLoss { .. }
        )
    }
}

pub type Result<T, E = CpeError> = std::result::Result<T, E>;
