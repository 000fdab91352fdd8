use eustwin::Error;

/// Failure of a subcommand. The variant decides the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    /// Config error for a core validation failure under `prefix`, e.g.
    /// `high.fractional_bandwidth`.
    pub fn field(prefix: &str, err: Error) -> Self {
        match err {
            Error::InvalidParameter { field, reason } => CliError::Config(format!("`{prefix}.{field}`: {reason}")),
            other => CliError::Config(format!("`{prefix}`: {other}")),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match err {
            Error::InvalidParameter { .. }
            | Error::Undersampled { .. }
            | Error::OutOfBounds { .. }
            | Error::DepthsNotIncreasing
            | Error::MountMismatch
            | Error::TooFewItems { .. } => CliError::Config(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
