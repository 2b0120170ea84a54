use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or unreadable configuration; exit code 2.
    #[error("config error: {0}")]
    Schema(String),
    /// Failure while running a valid configuration; exit code 1.
    #[error(transparent)]
    Runtime(#[from] mriq::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

pub type CliResult<T> = std::result::Result<T, CliError>;
