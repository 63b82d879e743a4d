use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad arguments or configuration; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or inconsistent data; exit code 2.
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Task(#[from] rampkit_tasks::DataError),
    #[error(transparent)]
    Core(#[from] rampkit_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
