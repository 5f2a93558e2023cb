use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("correlation is undefined for a zero-norm signature")]
    UndefinedCorrelation,

    #[error(
        "insufficient dimensions: {probes} probes plus signal rank {rank} exceed frame space of {frame_dims}"
    )]
    InsufficientDimensions {
        probes: usize,
        rank: usize,
        frame_dims: usize,
    },

    #[error("probe position {0} lies in the allowlisted signal span")]
    ProbeInSignalSpan(usize),

    #[error("degenerate noise-variance estimate {0}")]
    DegenerateEstimate(f64),

    #[error("device `{0}` is already enrolled")]
    DuplicateDevice(String),

    #[error("device `{0}` is not enrolled")]
    UnknownDevice(String),

    #[error("no channel realization supplied for device `{0}`")]
    MissingChannel(String),

    #[error("device profile `{id}` violates an invariant: {reason}")]
    InvalidProfile { id: String, reason: String },

    #[error("registry schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("malformed document: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
