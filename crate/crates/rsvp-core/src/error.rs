//! Error taxonomy shared across the pipeline.
//!
//! The variants mirror how callers must react: `InvalidInput` and
//! `ContractViolation` are caller bugs, `BackendUnavailable` is retryable,
//! `Config`/`Auth` are not, and `ParseFailure` is a per-sample data outcome
//! that the batch runner converts into an empty prediction.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value fed into an operation violates that operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An internal contract between two stages was broken (e.g. a crop rect
    /// outside its image). Indicates a bug upstream, not bad user data.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A remote backend could not be reached after the configured retries.
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    /// Authentication or authorization was rejected by a backend. Never retried.
    #[error("auth rejected: {0}")]
    Auth(String),

    /// Bad or missing configuration (descriptor, env var, template).
    #[error("configuration error: {0}")]
    Config(String),

    /// A backend response contained no machine-readable proposal block.
    #[error("proposal parse failure: {0}")]
    ParseFailure(String),

    /// A serialized artifact (RLE counts, manifest, report) is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// A remote peer violated the wire protocol.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The ablation cross-product exceeded the configured cap.
    #[error("ablation grid too large: {requested} combinations, cap {cap}")]
    AblationCapExceeded { requested: usize, cap: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Transient transport failures are worth retrying; everything else is not.
    pub fn is_transient(&self) -> bool {
        matches!(self, Error::BackendUnavailable(_))
    }
}
