use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration: dimension mismatches, invalid hyperparameters,
    /// inconsistent variant flags, unknown names.
    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite value reached a gradient or parameter.
    #[error("numerical failure in {stage}: {diagnostics}")]
    Numerical { stage: String, diagnostics: String },

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numerical(stage: impl Into<String>, diagnostics: impl Into<String>) -> Self {
        Error::Numerical {
            stage: stage.into(),
            diagnostics: diagnostics.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems,
    /// 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Numerical { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
