use thiserror::Error;

use crate::polycore::MultiIndex;

/// Every failure the library reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature rule would need {requested} nodes, above the cap of {cap}")]
    TooManyNodes { requested: u128, cap: u128 },

    #[error("non-finite integrand value {value} at node {node:?}")]
    NonFinite { node: Vec<f64>, value: f64 },

    #[error("rule exactness {available} is below the required degree {required}")]
    InsufficientExactness { required: usize, available: usize },

    #[error("orthogonalization is ill-conditioned at multi-index {index}: residual norm {norm:e}")]
    IllConditioned { index: MultiIndex, norm: f64 },

    #[error("no spanning direction set after {attempts} attempts (best rank {best_rank} of {needed})")]
    SpanningFailed {
        attempts: usize,
        best_rank: usize,
        needed: usize,
    },

    #[error("residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("dictionary: {0}")]
    Dictionary(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
