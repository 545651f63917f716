use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied something outside an operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A computation finished but produced something unusable
    /// (nonpositive ground state, NaN, failed eigensolve, ...).
    #[error("numerical failure in {context}: {message}")]
    Numerical {
        context: &'static str,
        message: String,
    },

    /// A checked mathematical property did not hold on the computed data.
    #[error("property violated: {0}")]
    PropertyViolation(String),
}

impl Error {
    pub(crate) fn numerical(context: &'static str, message: impl Into<String>) -> Self {
        Error::Numerical {
            context,
            message: message.into(),
        }
    }

    pub(crate) fn argument(message: impl Into<String>) -> Self {
        Error::Argument(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
