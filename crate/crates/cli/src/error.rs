use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fuznet::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 2 I/O, 3 configuration, 4 artifact mismatch, 5 verification failure.
    pub fn exit_code(&self) -> u8 {
        use fuznet::Error as E;
        match self {
            CliError::Io(_) | CliError::Core(E::Io(_)) => 2,
            CliError::Config(_) | CliError::Core(E::Config(_)) => 3,
            CliError::Core(E::Format { .. } | E::Input { .. } | E::Contract(_)) => 4,
            CliError::Verification(_) => 5,
            CliError::Core(_) => 1,
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}
