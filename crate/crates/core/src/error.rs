//! Error type shared by every module in the crate.

use thiserror::Error;

/// Everything that can go wrong when building inputs or evaluating an
/// estimator. Variants carry enough context to point at the offending
/// argument without holding references into caller data.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("lag {lag} out of range for series of length {n}")]
    LagOutOfRange { lag: usize, n: usize },

    #[error("degenerate series: zero variance")]
    DegenerateSeries,

    #[error("singular matrix in {context}")]
    SingularMatrix { context: &'static str },

    #[error("bandwidth p={p} out of range for n={n} (need 1 <= p < n)")]
    BandwidthOutOfRange { p: usize, n: usize },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
