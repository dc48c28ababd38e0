use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },

    #[error("format error: {0}")]
    Format(String),

    #[error("data error at vertex {index}: {message}")]
    Data { index: usize, message: String },

    #[error("validation error in view {view}: {message}")]
    Validation { view: i64, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("optimizer error: {0}")]
    Optimizer(String),

    /// Nothing left to edit after unprojection and filtering.
    #[error("empty selection: {0}")]
    EmptySelection(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), cause: source }
    }
}
