use std::path::PathBuf;

use thiserror::Error;

use crate::run::FaultPoint;

/// A locked file whose digest no longer matches the one recorded at init.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("locked file {} {reason}", file.display())]
pub struct LockViolation {
    pub file: PathBuf,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("run `{0}` already exists in this workspace")]
    TagCollision(String),
    #[error("workspace already hosts run `{existing}`")]
    WorkspaceInUse { existing: String },
    #[error("no run found in {}", .0.display())]
    NotInitialized(PathBuf),
    #[error("evaluator lock violated: {0}")]
    Lock(#[from] LockViolation),
    #[error("holdout isolation violated by {}: {reason}", path.display())]
    Isolation { path: PathBuf, reason: String },
    #[error("baseline candidate failed to score: {0}")]
    InitFailed(String),
    #[error("results.tsv line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("snapshot store: {0}")]
    CorruptStore(String),
    #[error("hard cap of {cap} experiments reached")]
    BudgetExhausted { cap: usize },
    #[error("interrupted at {point:?} of experiment {experiment}")]
    Interrupted {
        point: FaultPoint,
        experiment: usize,
    },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
