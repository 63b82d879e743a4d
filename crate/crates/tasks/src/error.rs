use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{origin}:{line}: {msg}")]
    Line {
        origin: String,
        line: usize,
        msg: String,
    },
    #[error("invalid sizes: {0}")]
    Sizes(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DataError {
    pub(crate) fn line(origin: &str, line: usize, msg: impl Into<String>) -> Self {
        Self::Line {
            origin: origin.to_string(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;
