//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input schema does not match the data (missing column, bad manifest).
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell failed to parse; carries the 1-based data row index.
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    /// A record or configuration value violates an invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Incompatible options (model variant vs. inputs, degenerate splits...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Function called outside its numeric domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The MCMC sampler failed to move; carries a short trace excerpt.
    #[error("sampler failure: {msg}\ntrace: {trace}")]
    SamplerFailure { msg: String, trace: String },

    /// A metric is undefined on the given inputs.
    #[error("undefined metric: {0}")]
    Undefined(String),

    /// Lookup of an id that the container does not know.
    #[error("unknown id: {0}")]
    UnknownId(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<String>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
