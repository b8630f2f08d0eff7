use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular least-squares system")]
    Singular,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{}: line {line}: {msg}", path.display())]
    FileParse { path: PathBuf, line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model file: {0}")]
    Schema(String),

    #[error("ARIMA({p},{d},{q}) fit failed: {msg}; try different orders")]
    ArimaFit { p: usize, d: usize, q: usize, msg: String },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
