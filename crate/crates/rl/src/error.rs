use std::path::PathBuf;

use wordact_core::CoreError;
use wordact_neural::NeuralError;

#[derive(Debug, thiserror::Error)]
pub enum RlError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Neural(#[from] NeuralError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Corpus { path: PathBuf, line: usize, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("{0}")]
    Usage(String),
}

impl RlError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RlError::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error comes from non-finite numbers during training.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            RlError::Divergence(_)
                | RlError::Neural(NeuralError::NonFiniteGradient(_))
                | RlError::Neural(NeuralError::NonFiniteLoss(_))
        )
    }
}

pub type Result<T> = std::result::Result<T, RlError>;
