use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A factorization pivot fell below the relative threshold. Callers
    /// discard and count the sample; nothing is regularized silently.
    #[error("singular matrix: pivot {pivot:e} at index {index} below threshold {threshold:e}")]
    SingularMatrix {
        index: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),

    #[error("steering vector requested for the wrong array kind")]
    WrongGeometry,

    #[error("invalid distance {0} m (must be > 0)")]
    InvalidDistance(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    #[error("{discarded} of {total} realizations were singular (limit is 1%)")]
    TooManySingular { discarded: usize, total: usize },

    #[error("error magnitude not evaluable: approximation is singular")]
    NotEvaluable,

    #[error("per-UE expected SNRs differ ({min} vs {max}); use the per-UE sum")]
    NonUniformBeta { min: f64, max: f64 },

    #[error("mean Gram matrix is not diagonal (off-diagonal magnitude {0:e})")]
    NonDiagonalMean(f64),
}
