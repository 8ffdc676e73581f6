use std::io;
use std::path::PathBuf;

use crate::wav::WavError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can stop a command, grouped by exit category.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", .path.display())]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error(transparent)]
    Core(#[from] schoolroom_core::Error),
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn stage(stage: &'static str, message: impl Into<String>) -> Self {
        Error::Stage {
            stage,
            message: message.into(),
        }
    }

    /// 2 for a bad config, 3 for missing inputs, 4 for anything that failed
    /// while a stage was running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::MissingInput(_) | Error::Wav(WavError::NotFound(_)) => 3,
            _ => 4,
        }
    }
}
