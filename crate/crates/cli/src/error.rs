use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Data { path: PathBuf, line: u64, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Numeric(#[from] nlirf::Error),
}

impl CliError {
    pub fn schema(path: &str, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Schema { .. } | CliError::Data { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }
}
