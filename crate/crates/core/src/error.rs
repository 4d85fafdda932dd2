use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {value} outside [{lo}, {hi}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e}); increase the noise/jitter term")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("simulation failed for state {state:?} / action {action:?}: {source}")]
    Simulation {
        state: [f64; 5],
        action: [f64; 3],
        #[source]
        source: Box<Error>,
    },

    #[error("state {0:?} is not within half a grid cell of any grid state")]
    OffGrid([f64; 5]),

    #[error("schema version {found} unsupported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("file header ranges do not match compiled normalization ranges: {0}")]
    HeaderMismatch(String),

    #[error("{path}:{line}: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfRange { .. } => "out_of_range",
            Error::Validation { .. } => "validation",
            Error::Invariant(_) => "invariant",
            Error::NonFinite(_) => "non_finite",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::Diverged { .. } => "diverged",
            Error::Simulation { .. } => "simulation",
            Error::OffGrid(_) => "off_grid",
            Error::SchemaVersion { .. } => "schema_version",
            Error::HeaderMismatch(_) => "header_mismatch",
            Error::MalformedLine { .. } => "malformed_line",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
