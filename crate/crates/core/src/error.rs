use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("malformed scenario document: {0}")]
    Parse(String),

    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("cannot resample track {track}: {reason}")]
    Resample { track: String, reason: String },

    #[error("cannot anchor scenario: {0}")]
    Anchoring(String),

    #[error("lane query failed: map has no lane centerlines")]
    NoLanes,

    #[error("scenario generation failed: {0}")]
    Generation(String),

    #[error("non-finite numeric input: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("gap {0} m is not positive: vehicles already overlap")]
    Overlap(f64),

    #[error("step {step} out of range (scenario has {len} steps)")]
    StepOutOfRange { step: usize, len: usize },

    #[error("policy failure: {0}")]
    Policy(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("correlation undefined: zero variance")]
    ZeroVariance,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input data rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::Parse(_)
                | Error::SchemaVersion { .. }
                | Error::Json(_)
                | Error::Config(_)
        )
    }
}
