use std::path::PathBuf;

use mlhd_core::ErrorKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}: {message}")]
    Parse { origin: String, line: u64, message: String },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] mlhd_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(origin: &str, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.to_owned(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) => match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Input => 2,
                ErrorKind::Numerical => 3,
            },
            _ => 2,
        }
    }
}
