use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] nmq_core::Error),
    #[error("{command} is not available for this config: {reason}")]
    Unsupported { command: &'static str, reason: String },
    #[error("i/o error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}
