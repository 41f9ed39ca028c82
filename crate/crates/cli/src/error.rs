use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("refused by cost guard: {0}")]
    CostGuard(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A run that started but could not produce its estimates.
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::CostGuard(_) => EXIT_COST_GUARD,
            CliError::Io { .. } => EXIT_IO,
            CliError::Run(_) => EXIT_GATE,
        }
    }
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_GATE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_COST_GUARD: u8 = 3;
pub const EXIT_IO: u8 = 4;

impl From<tilted_core::Error> for CliError {
    fn from(e: tilted_core::Error) -> Self {
        use tilted_core::Error as E;
        match e {
            E::CostGuard { .. } => CliError::CostGuard(e.to_string()),
            E::Decode(_) => CliError::Run(e.to_string()),
            E::InsufficientEss { .. } => CliError::Run(e.to_string()),
            E::Consistency(_) => CliError::Run(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
