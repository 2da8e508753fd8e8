use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Solver(#[from] riemann_arc::Error),
    #[error("{}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
}

impl BenchError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub fn corrupt(path: &Path, message: impl ToString) -> Self {
        BenchError::Corrupt {
            path: path.to_owned(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
