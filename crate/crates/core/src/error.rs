use std::path::PathBuf;

/// Errors raised by the domain model, database and simulator.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    /// A value violates a schema or type invariant. `field` names the offending part.
    #[error("invalid {field}: {detail}")]
    Validation { field: String, detail: String },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON, with the line/column reported by the parser.
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsatisfiable schema weights: no goal with a matching entity after {attempts} attempts")]
    UnsatisfiableGoal { attempts: usize },

    /// API misuse, such as stepping a finished dialogue.
    #[error("usage error: {0}")]
    Usage(String),
}

impl CoreError {
    pub fn validation(field: impl Into<String>, detail: impl Into<String>) -> Self {
        CoreError::Validation {
            field: field.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, err: &serde_json::Error) -> Self {
        CoreError::Parse {
            path: path.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
