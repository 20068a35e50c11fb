use std::io;
use std::path::PathBuf;

use cmm_core::CmmError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("invalid mesh: {0}")]
    Mesh(CmmError),
    #[error("solver failed: {0}")]
    Solver(CmmError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for bad input or configuration, 3 for solver
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver(_) => 3,
            _ => 2,
        }
    }
}

/// `penalty_adapt.tau` -> `--penalty-adapt.tau`
pub(crate) fn flag_name(field: &str) -> String {
    format!("--{}", field.replace('_', "-"))
}
