use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

/// Everything a command can fail with. Configuration problems exit with 1,
/// problems with the data being processed with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{path}:{line}: {message}")]
    BadRecord { path: PathBuf, line: usize, message: String },
    #[error("unknown problem id {0:?}")]
    UnknownProblemId(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl ToString) -> Self {
        CliError::Validation { field: field.into(), message: message.to_string() }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 1,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Validation { .. } => "validation",
            CliError::Data(_) => "data",
            CliError::BadRecord { .. } => "bad_record",
            CliError::UnknownProblemId(_) => "unknown_problem_id",
            CliError::Io { .. } => "io",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        let mut obj = json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Validation { field, .. } = self {
            obj["field"] = json!(field);
        }
        obj.to_string()
    }
}
