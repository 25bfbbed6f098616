use std::path::PathBuf;

use splitlab_core::LabError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
    #[error("failing criteria: {0:?}")]
    Criteria(Vec<u8>),
}

impl CliError {
    /// 2 for bad input, 3 for numerical trouble or failed criteria.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 2,
            CliError::Lab(LabError::Input(_) | LabError::Domain(_) | LabError::Config(_)) => 2,
            _ => 3,
        }
    }
}
