use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter was outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Two objects that must share provenance (prompt set, projection, embedder) do not.
    #[error("provenance mismatch: {0}")]
    Provenance(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("embedding dimension drift for `{embedder}`: expected {expected}, got {actual}")]
    DimensionDrift {
        embedder: String,
        expected: usize,
        actual: usize,
    },

    /// Network failure that survived every retry.
    #[error("transport error for {url} after {attempts} attempt(s): {message}")]
    Transport {
        url: String,
        attempts: u32,
        message: String,
    },

    /// Non-retriable HTTP status.
    #[error("HTTP {status} from {url}: {body}")]
    Http { status: u16, url: String, body: String },

    #[error("unexpected response from {url}: {message}")]
    Protocol { url: String, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("newick parse error at offset {offset}: {message}")]
    Newick { offset: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn provenance(msg: impl Into<String>) -> Self {
        Error::Provenance(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether a caller may reasonably retry the failed operation later.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Transport { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
