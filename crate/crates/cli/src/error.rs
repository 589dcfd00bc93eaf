use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const INCORRECT_PRODUCT: i32 = 3;
    pub const VERIFICATION: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] mmcomm::Error),

    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(mmcomm::Error::IncorrectProduct { .. }) => exit::INCORRECT_PRODUCT,
            CliError::Verification(_) => exit::VERIFICATION,
            CliError::Config(_) | CliError::Core(_) | CliError::Io(_) => exit::CONFIG,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_code_contract() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(mmcomm::Error::ZeroProcessors).exit_code(), 2);
        assert_eq!(CliError::Core(mmcomm::Error::IncorrectProduct { row: 0, col: 1 }).exit_code(), 3);
        assert_eq!(CliError::Verification("kkt stationarity".into()).exit_code(), 4);
    }
}
