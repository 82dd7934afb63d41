use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected dimension {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("insufficient data: need at least {need} samples, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("covariance matrix ill-conditioned (factorization failed at max jitter)")]
    IllConditioned,

    #[error("duplicate design point")]
    DuplicateDesign,

    #[error("all candidates duplicate existing design points")]
    ExhaustedCandidates,

    #[error("estimator mismatch: {0}")]
    EstimatorMismatch(String),

    #[error("population of size {got} exceeds the direct-factorization guard ({max}); use the KL path")]
    SizeLimit { got: usize, max: usize },

    #[error("basis/model kernel mismatch: {0}")]
    KernelMismatch(String),

    #[error("population source cannot generate new samples: {0}")]
    Source(String),

    #[error("kernel density collapse: all weights are zero")]
    DensityCollapse,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no failing sample found; consider the importance-sampling mode")]
    ZeroFailure,

    #[error("coefficient of variation undefined: estimated probability is zero")]
    UndefinedCov,

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failure: {0}")]
    Serialize(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
