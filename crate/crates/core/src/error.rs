use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("parse error at row {row}{}: {message}", column.as_ref().map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        /// 1-based data row (the header is row 0).
        row: usize,
        column: Option<String>,
        message: String,
    },

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("missing reference channel {0}")]
    MissingReferenceChannel(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is rank deficient (smallest singular value {smallest:e})")]
    RankDeficient { smallest: f64 },

    #[error("degenerate vector: column {0} has (near) zero norm")]
    DegenerateVector(usize),

    #[error("degenerate latent: dimension {0} has zero variance")]
    DegenerateLatent(usize),

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("incompatible checkpoint: found format version {found}, expected {expected}")]
    IncompatibleCheckpoint { found: u32, expected: u32 },

    #[error("checkpoint integrity error: {0}")]
    Integrity(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from numerics (divergence, rank loss, NaN) rather
    /// than from malformed data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::NonFinite(_)
                | Error::RankDeficient { .. }
                | Error::DegenerateLatent(_)
                | Error::DegenerateVector(_)
        )
    }
}
