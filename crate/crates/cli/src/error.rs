use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("runtime error: {0}")]
    Runtime(String),

    /// A property check reported failures.
    #[error("property check failed: {0}")]
    PropertyFailure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::PropertyFailure(_) => 3,
        }
    }

    pub(crate) fn io(context: &str, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{context}: {e}"))
    }
}

impl From<softqd::Error> for CliError {
    fn from(e: softqd::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
