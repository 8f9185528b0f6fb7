use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lattice box mismatch: {0}")]
    BoxMismatch(String),

    #[error("non-positive conductance {value} on edge {edge}")]
    NonPositiveConductance { edge: usize, value: f64 },

    #[error("charge is not neutral (total {0:e})")]
    NonNeutralCharge(f64),

    #[error("covariance not embeddable: clipped spectral mass fraction {fraction:e} exceeds {limit:e}")]
    NotEmbeddable { fraction: f64, limit: f64 },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("operator is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("matrix not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("evaluation point {0:?} lies inside the charge support")]
    Singular([i64; 3]),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors coming out of a linear solve.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::Indefinite { .. } | Error::NotPositiveDefinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
