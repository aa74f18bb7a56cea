use thiserror::Error;

/// Failures of the experiment runner, split by the exit status they map to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: unreadable or malformed config, invalid flags.
    #[error("{0}")]
    Config(String),

    /// The simulation or output stage failed.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<relaysim_core::Error> for CliError {
    fn from(e: relaysim_core::Error) -> Self {
        match e {
            relaysim_core::Error::Config(_)
            | relaysim_core::Error::TxPowerTooHigh { .. }
            | relaysim_core::Error::InvalidCodingRate(_)
            | relaysim_core::Error::MissingSensitivity { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("csv: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
