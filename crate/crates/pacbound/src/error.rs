use std::path::PathBuf;
use std::process::ExitCode;

use pacbound_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Model(#[from] CoreError),

    #[error("solver did not reach the requested accuracy: {0}")]
    Solver(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{count} propert{suffix} failed", count = .0, suffix = if *.0 == 1 { "y" } else { "ies" })]
    PropertyFailure(usize),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// 0 ok, 1 property failure, 2 input error, 3 solver failure, 4 I/O error.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::PropertyFailure(_) => 1,
            Self::Input(_) | Self::Parse { .. } | Self::Model(_) => 2,
            Self::Solver(_) => 3,
            Self::Io { .. } => 4,
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
