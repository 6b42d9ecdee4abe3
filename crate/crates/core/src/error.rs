use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Configuration file could not be parsed or failed validation.
    /// `path` is the dotted key path to the offending entry.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("acoustics error: {0}")]
    Acoustics(String),

    /// Two grids that must share a spec (e.g. intensity map and skin
    /// surface) do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("solver error: {0}")]
    Solver(String),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (config/CLI), as opposed to
    /// runtime/solver failures. Drives the CLI exit-code contract.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
