use std::path::PathBuf;

/// Failures of the command-line harness.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation or configuration.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("cannot parse config {path}: {source}")]
    Config { path: PathBuf, source: serde_json::Error },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] otgraph::Error),
}

impl CliError {
    /// 2 for usage errors, 1 for everything that failed at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config { .. } | Self::Core(otgraph::Error::Usage(_)) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
