use std::path::PathBuf;

use wgfh_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },
    #[error("{context}: {source}")]
    Module {
        context: String,
        #[source]
        source: CoreError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report: {0}")]
    Report(String),
}

impl RunError {
    /// 1 invariant failure, 2 config error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Module { source, .. } => match source {
                CoreError::Invariant(_) => 1,
                CoreError::Parse(_)
                | CoreError::Resonance { .. }
                | CoreError::Bounds(_)
                | CoreError::Unsupported(_)
                | CoreError::Invalid(_) => 2,
                _ => 3,
            },
            RunError::Io { .. } | RunError::Report(_) => 3,
        }
    }
}

/// Attaches experiment context to module errors.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, RunError>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, RunError> {
        self.map_err(|source| RunError::Module {
            context: what(),
            source,
        })
    }
}
