use thiserror::Error;

/// Command failure, classified by the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    /// Bad flags, configuration or manifest contents.
    #[error("usage error: {0}")]
    Usage(String),
    /// Unreadable, malformed or inconsistent data, or unwritable output.
    #[error("data error: {0}")]
    Data(String),
    /// Non-finite values during training.
    #[error("numeric fault: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<sgnn_core::Error> for CliError {
    fn from(e: sgnn_core::Error) -> Self {
        use sgnn_core::Error as E;
        match e {
            E::NumericFault(_) => CliError::Numeric(e.to_string()),
            E::InvalidConfig(_) | E::InvalidRate(_) | E::InvalidTime(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
