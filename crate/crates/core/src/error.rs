use thiserror::Error;

/// Errors raised by the sketching, pool and attack machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("key {key} is outside the ground set of size {n}")]
    KeyOutOfRange { key: u32, n: u32 },

    #[error("ground set mismatch: expected {expected} keys, got {got}")]
    UniverseMismatch { expected: u32, got: u32 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("rate breakpoints rejected: {0}")]
    Breakpoints(String),

    #[error("sketches come from different map instances: {0}")]
    SketchMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("shifted thresholds collapse: A' = {lower} >= B' = {upper}")]
    ThresholdsCollapsed { lower: i64, upper: i64 },

    #[error("observed rank {observed} exceeds declared bound {bound}")]
    RankBoundViolated { observed: usize, bound: usize },

    #[error("precision budget exceeded: {0}")]
    Precision(String),

    #[error("rate {q} is below the subsample rate {q0}")]
    RateBelowSubsample { q: f64, q0: f64 },

    #[error("robust wrapper exhausted after {0} queries")]
    Exhausted(usize),

    #[error("malformed matrix fixture: {0}")]
    Fixture(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
