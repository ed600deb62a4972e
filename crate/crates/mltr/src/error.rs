use std::path::PathBuf;

use thiserror::Error;

use crate::letor::LetorError;

/// Process exit codes of the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Letor {
        path: PathBuf,
        #[source]
        source: LetorError,
    },

    #[error(transparent)]
    Core(#[from] mltr_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl AppError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use mltr_core::Error as E;
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Data(_) | Self::Letor { .. } => exit::DATA,
            Self::Core(e) => match e {
                E::InvalidConfig(_) => exit::CONFIG,
                E::NonFiniteLoss { .. } => exit::NUMERIC,
                _ => exit::DATA,
            },
            Self::Io { .. } | Self::Checkpoint(_) => exit::FAILURE,
        }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
