use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty dimension")]
    EmptyDimension,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("non-finite value at coordinate {coordinate} of input {input}")]
    NonFinite { input: usize, coordinate: usize },

    /// A rule-specific precondition failed, e.g. `Bulyan requires n ≥ 4f+3`.
    #[error("{rule} requires {constraint}")]
    Precondition { rule: &'static str, constraint: String },

    #[error("DnC removed everyone")]
    DncRemovedEveryone,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn precondition(rule: &'static str, constraint: impl Into<String>) -> Self {
        Error::Precondition {
            rule,
            constraint: constraint.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
