use std::fmt;
use std::io;
use std::path::PathBuf;

/// Errors produced anywhere in the tracking pipeline.
#[derive(Debug)]
pub enum Error {
    /// An operation was called with arguments that break its contract
    /// (mismatched axes, window larger than input, and so on).
    Contract(String),
    /// A loss or response became NaN/Inf.
    NonFinite(String),
    /// Malformed on-disk data: bad magic, truncated blocks, bad annotations.
    Format(String),
    /// Invalid user-supplied configuration.
    Config(String),
    Io {
        path: Option<PathBuf>,
        source: io::Error,
    },
    Json(serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io_at(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: Some(path.into()),
            source,
        }
    }

    /// True for errors caused by bad input data or configuration rather
    /// than by numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::NonFinite(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Contract(m) => write!(f, "contract violation: {m}"),
            Error::NonFinite(m) => write!(f, "non-finite value: {m}"),
            Error::Format(m) => write!(f, "format error: {m}"),
            Error::Config(m) => write!(f, "invalid configuration: {m}"),
            Error::Io {
                path: Some(p),
                source,
            } => write!(f, "i/o error on {}: {source}", p.display()),
            Error::Io { path: None, source } => write!(f, "i/o error: {source}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(source: io::Error) -> Self {
        Error::Io { path: None, source }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}
