use thiserror::Error;

use pricing_lab::LabError;

/// Exit status when every cell succeeded.
pub const EXIT_OK: u8 = 0;
/// A verification check failed.
pub const EXIT_FAILED: u8 = 1;
/// At least one grid cell ended in an error.
pub const EXIT_CELL_ERROR: u8 = 2;
/// The configuration or the command line was rejected.
pub const EXIT_CONFIG: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_CELL_ERROR,
        }
    }
}

/// Library errors met while validating input are configuration errors.
impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Config(e.to_string())
    }
}
