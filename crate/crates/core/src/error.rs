use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rotation angle {angle} is within {margin} of pi; log map is ill-conditioned")]
    AngleNearPi { angle: f64, margin: f64 },

    #[error("length mismatch: estimate has {est} poses, ground truth has {gt}")]
    LengthMismatch { est: usize, gt: usize },

    #[error("trajectory too short: {len} poses, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("need at least {needed} sequences, got {got}")]
    TooFewSequences { needed: usize, got: usize },

    #[error("negative loss {0}")]
    NegativeLoss(f64),

    #[error("flow key mismatch: {0}")]
    KeyMismatch(String),

    #[error("flow shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("sequence {id} has unknown level {level}")]
    UnknownLevel { id: String, level: u8 },

    #[error("replay buffer holds {size} transitions, batch needs {batch}")]
    Underfull { size: usize, batch: usize },

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },

    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: timestamp {timestamp} does not increase")]
    NonMonotonicTimestamps { line: usize, timestamp: f64 },

    #[error("line {line}: quaternion norm {norm} outside [0.9, 1.1]")]
    BadQuaternion { line: usize, norm: f64 },

    #[error("missing columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::AngleNearPi { .. }
                | Error::DegenerateGeometry(_)
                | Error::NonFiniteGradient(_)
                | Error::NonFiniteLoss { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
