use thiserror::Error;

/// Errors raised across the estimation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty event")]
    EmptyEvent,
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("total incompatibility: every grade vanished after conditioning")]
    TotalIncompatibility,
    #[error("enumeration limit: {size} points exceeds the exact limit of {limit}")]
    EnumerationLimit { size: usize, limit: usize },
    #[error("cold start: NEES window is empty")]
    ColdStart,
    #[error("degenerate covariance: Cholesky failed after jitter")]
    DegenerateCovariance,
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),
    #[error("singular innovation covariance")]
    SingularInnovation,
    #[error("mismatched point sets")]
    MismatchedPoints,
    #[error("evidence contradiction: no support point survives the compatibility gate")]
    EvidenceContradiction,
    #[error("unbounded domain")]
    UnboundedDomain,
    #[error("config error: {0}")]
    Config(String),
    #[error("seed mismatch: {0} vs {1}")]
    SeedMismatch(u64, u64),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
