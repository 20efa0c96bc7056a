use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or input parameter failed validation.
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// An argument lies outside the domain of the function being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// The law cannot compute the centering term for the requested function.
    #[error("no mean oracle: {0}")]
    OracleMissing(String),

    /// No mixing constant can be certified for the requested process.
    #[error("no valid mixing constant: {0}")]
    NoValidMixing(String),

    /// An operation's documented precondition does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("family too large for exhaustive search: {0}")]
    Size(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
