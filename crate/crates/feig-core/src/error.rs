use thiserror::Error;

/// Errors shared across the numerical layers.
#[derive(Debug, Error)]
pub enum FeigError {
    #[error("criticality must be an even integer >= 2, got {0}")]
    BadCriticality(u32),

    #[error("iteration failed to converge: {0}")]
    NonConvergence(String),

    #[error("point left every known evaluation domain: {0}")]
    OutOfDomain(String),

    #[error("inverse-branch continuation jumped sheets near {0}")]
    BranchLoss(String),

    #[error("partition sum does not straddle 1 on [{0}, {1}]")]
    NoBracket(f64, f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("curve resolution too low: {0}")]
    InsufficientResolution(String),

    #[error("measure depth too low: {0}")]
    InsufficientDepth(String),

    #[error("point is not covered by the generated tiling: {0}")]
    NotCovered(String),

    #[error("classification margin below tolerance: {0}")]
    Ambiguous(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FeigError>;
