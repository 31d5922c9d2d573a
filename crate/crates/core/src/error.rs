use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FastError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero-norm direction: {0}")]
    ZeroDirection(&'static str),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown sample id `{0}`")]
    UnknownSample(String),

    #[error("duplicate sample id `{0}`")]
    DuplicateSample(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("svm did not converge after {iterations} iterations (kkt gap {gap:.3e}, dual objective {objective:.6e})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        objective: f64,
    },

    #[error("alphabet mismatch between distributions")]
    AlphabetMismatch,

    #[error("zero-probability event {0}; ln-TV needs strictly positive masses")]
    ZeroProbability(String),

    #[error("premise violated: {0}")]
    PremiseViolated(String),

    #[error("manifest: {0}")]
    Manifest(String),
}

impl FastError {
    /// True for failures of a numerical procedure (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            FastError::Singular(_) | FastError::Factorization(_) | FastError::NotConverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, FastError>;
