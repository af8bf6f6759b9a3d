use std::path::PathBuf;

use thiserror::Error;

/// Pipeline failures, grouped by exit code.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("data error: {0}")]
    Data(String),
    #[error("id mismatch at row {row}: expected `{expected}`, found `{found}`")]
    IdMismatch {
        row: usize,
        expected: String,
        found: String,
    },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("bad EMB1 file: {0}")]
    Format(String),
    #[error("network error: {message} (failed ids: {failed_ids:?})")]
    Network {
        message: String,
        failed_ids: Vec<String>,
    },
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] embinv_core::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

impl PipelineError {
    /// Process exit code: 2 config, 3 data, 4 network.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::MissingFile(_) => 2,
            PipelineError::Network { .. } => 4,
            PipelineError::Core(embinv_core::Error::InvalidArgument { .. }) => 2,
            PipelineError::Data(_)
            | PipelineError::IdMismatch { .. }
            | PipelineError::DimMismatch { .. }
            | PipelineError::Format(_)
            | PipelineError::Io { .. }
            | PipelineError::Core(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            PipelineError::MissingFile(path)
        } else {
            PipelineError::Io { path, source }
        }
    }
}
