use std::io;
use std::path::PathBuf;

/// Errors of the file formats and the command line.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] treepolya_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    /// Malformed count data.
    #[error("{0}")]
    Parse(String),
    /// Malformed model or tree document.
    #[error("{0}")]
    Document(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Machine-readable tag printed as `error[<category>]`.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Io { .. } => "io",
            CliError::Parse(_) => "parse",
            CliError::Document(_) => "document",
            CliError::Usage(_) => "usage",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<io::Error> for CliError {
    fn from(source: io::Error) -> Self {
        CliError::io("<stream>", source)
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
