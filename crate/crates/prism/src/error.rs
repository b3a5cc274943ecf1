use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] prism_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}:{line}: {msg}", path.display())]
    Format { path: PathBuf, line: usize, msg: String },
    #[error("image {}: {msg}", path.display())]
    Image { path: PathBuf, msg: String },
    #[error("checkpoint {}: {msg}", path.display())]
    Checkpoint { path: PathBuf, msg: String },
    #[error("verification failed: {0}")]
    Verify(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
        Error::Format {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        }
    }

    /// Bad input the caller can fix (exit code 2), as opposed to a failure
    /// while doing the work (exit code 1).
    pub fn is_validation(&self) -> bool {
        use prism_core::Error as C;
        match self {
            Error::Config(_) => true,
            Error::Core(e) => matches!(
                e,
                C::InvalidArgument(_) | C::Unknown { .. } | C::Granularity(_) | C::Dimension(_)
            ),
            _ => false,
        }
    }
}
