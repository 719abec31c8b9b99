//! Error type carrying the process exit code contract:
//! 0 ok, 2 config error, 3 missing input, 4 verification failure.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("missing input: {0} (run the earlier pipeline stages first)")]
    MissingInput(PathBuf),
    #[error("verification failure: {0}")]
    Verification(String),
    #[error("{0}")]
    Other(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::MissingInput(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Other(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn config(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}
