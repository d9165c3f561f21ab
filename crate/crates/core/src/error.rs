use thiserror::Error;

pub type Result<T> = std::result::Result<T, KromError>;

#[derive(Debug, Error)]
pub enum KromError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl KromError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        KromError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
