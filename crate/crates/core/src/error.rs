use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or input value lies outside its allowed domain.
    #[error("invalid {field}: {reason}")]
    Domain { field: String, reason: String },

    /// A numeric routine produced a non-finite or degenerate value.
    #[error("numeric failure{}: {reason}", iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default())]
    Numeric {
        iteration: Option<usize>,
        reason: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

impl Error {
    pub(crate) fn domain(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn numeric(iteration: Option<usize>, reason: impl Into<String>) -> Self {
        Error::Numeric {
            iteration,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
