use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure{}: {message}", at.map(|(r, c)| format!(" at exemplar ({r}, {c})")).unwrap_or_default())]
    Numerical {
        message: String,
        /// Top-left position of the exemplar patch whose group failed, when known.
        at: Option<(usize, usize)>,
    },

    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("verification failed: {0}")]
    Verify(String),
}

impl Error {
    pub(crate) fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn invalid_param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Io {
            path: path.into(),
            message: msg.to_string(),
        }
    }

    /// Attach the exemplar position to a numerical failure raised deeper down.
    pub fn at_exemplar(self, pos: (usize, usize)) -> Self {
        match self {
            Error::Numerical { message, at: None } => Error::Numerical {
                message,
                at: Some(pos),
            },
            other => other,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::InvalidParameter(_) => 2,
            Error::Io { .. } => 3,
            Error::Numerical { .. } | Error::Internal(_) => 4,
            Error::Verify(_) => 5,
        }
    }
}
