use std::{io, path::PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] spangraph_core::Error),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// Process exit code: 1 for configuration, 2 for data, 3 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        use spangraph_core::Error as C;
        match self {
            Error::Config(_) | Error::Core(C::Config(_) | C::Request(_)) => 1,
            Error::Core(C::Numerical(_) | C::Weighting(_)) => 3,
            _ => 2,
        }
    }
}
