use std::io;
use std::path::{Path, PathBuf};

use evidence_core::eval::EvalError;
use evidence_core::ingest::IngestError;
use evidence_core::pipeline::PipelineError;
use evidence_core::providers::ProviderError;
use evidence_core::retrieval::RetrievalError;
use evidence_core::taxonomy::TaxonomyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("duplicate document id {0}")]
    DuplicateDocument(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("provider: {0}")]
    Provider(#[from] ProviderError),
    #[error("snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },
    #[error("internal error: {0}")]
    Internal(String),
}

impl EngineError {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> EngineError + '_ {
        move |source| EngineError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, line: usize, message: impl ToString) -> EngineError {
        EngineError::Parse { path: path.to_path_buf(), line, message: message.to_string() }
    }

    /// Whether the failure is the caller's to fix (bad input, missing
    /// files) rather than a fault in the engine.
    pub fn is_user_error(&self) -> bool {
        match self {
            EngineError::Internal(_) => false,
            EngineError::Provider(e) | EngineError::Retrieval(RetrievalError::Embedding { source: e, .. }) => {
                !matches!(e, ProviderError::Unavailable(_))
            }
            EngineError::Io { source, .. } => matches!(
                source.kind(),
                io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied | io::ErrorKind::AlreadyExists
            ),
            _ => true,
        }
    }
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;
