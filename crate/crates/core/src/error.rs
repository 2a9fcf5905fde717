use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative probability {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("expected {expected} probabilities, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("variable `{0}` has zero cardinality")]
    ZeroCardinality(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{0}` appears more than once")]
    DuplicateVariable(String),

    #[error("parent `{0}` is not produced by an earlier factor")]
    DanglingParent(String),

    #[error("variable `{0}` is the child of more than one factor")]
    DuplicateChild(String),

    #[error("variable sets overlap on `{0}`")]
    OverlappingSubsets(String),

    #[error("distributions have different shapes")]
    ShapeMismatch,

    #[error("conditional mutual information is negative ({0:e}); numerical inconsistency")]
    NegativeInformation(f64),

    #[error("factor `{factor}`: expected cardinality {expected} for `{var}`, found {found}")]
    CardinalityMismatch {
        factor: String,
        var: String,
        expected: usize,
        found: usize,
    },

    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("codebook too large: n*rate = {0:.3} exceeds the limit of 24 bits")]
    CodebookTooLarge(f64),

    #[error("Blahut-Arimoto did not converge; best value {best}")]
    NotConverged { best: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
