use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The theory document failed to parse or violates the schema.
    #[error("{path}:{line}:{column}: {message}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown builtin '{0}'")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Core(#[from] gptw_core::Error),
    #[error("cannot serialize report: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl CliError {
    /// Every error the front end reports is an input error.
    pub fn exit_code(&self) -> i32 {
        crate::ExitStatus::InputError.code()
    }

    pub(crate) fn schema(path: &str, err: &serde_json::Error) -> Self {
        let message = err.to_string();
        // serde_json appends " at line L column C"; keep only the message.
        let message = match message.rfind(" at line ") {
            Some(pos) => message[..pos].to_string(),
            None => message,
        };
        CliError::Schema {
            path: path.to_string(),
            line: err.line(),
            column: err.column(),
            message,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
