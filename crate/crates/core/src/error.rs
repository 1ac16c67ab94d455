use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid bandwidth {0}: must be positive and finite")]
    InvalidBandwidth(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("anchor {0} has no positives")]
    EmptyAnchor(usize),

    #[error("class {0} has a single member")]
    SingletonClass(i64),

    #[error("row {0} has zero total mass")]
    ZeroRow(usize),

    #[error("anchor {anchor} lists positive {positive} in its own modality")]
    SameModalityPositive { anchor: usize, positive: usize },

    #[error("modality {0} has no members")]
    EmptyModality(u8),

    #[error("embedding row {0} is the zero vector")]
    ZeroVector(usize),

    #[error("node {0} has zero degree")]
    ZeroDegree(usize),

    #[error("cluster {0} has zero volume")]
    ZeroVolume(usize),

    #[error("feature {row} coincides with more than one prototype at sigma = 0")]
    AmbiguousCoincidence { row: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("all {0} restarts diverged")]
    AllRestartsDiverged(usize),

    #[error("graph has {components} components, more than the requested {k} eigenvectors can separate")]
    Disconnected { components: usize, k: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error("config error at {pointer}: {reason}")]
    Config { pointer: String, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
