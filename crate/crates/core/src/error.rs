use std::path::PathBuf;

/// Errors produced anywhere in the enhancement pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported audio format: {0}")]
    Format(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("generalized eigenvalue solve failed at frequency bin {bin}: {reason}")]
    Solver { bin: usize, reason: String },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
