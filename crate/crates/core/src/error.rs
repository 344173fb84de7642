use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("mass mismatch: source {source_mass} vs target {target_mass}")]
    MassMismatch { source_mass: f64, target_mass: f64 },

    #[error("quantile level {level} outside [0, {total}]")]
    QuantileDomain { level: f64, total: f64 },

    #[error("logarithmic position transform requires positive positions, got {0}")]
    NonPositivePosition(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("empty signal")]
    EmptySignal,

    #[error("signal of length {len} is shorter than window {window}")]
    SignalTooShort { len: usize, window: usize },

    #[error("frame {0} of the target has zero energy")]
    ZeroEnergyFrame(usize),

    #[error("every target frame has zero energy")]
    SilentTarget,

    #[error("estimate frame {0} has zero energy")]
    SilentEstimateFrame(usize),

    #[error("frequency {0} Hz outside the representable range")]
    FrequencyOutOfRange(f64),

    #[error("loss diverged at step {step}: {value}")]
    Diverged { step: usize, value: f64 },

    #[error("unknown variant {0:?}")]
    UnknownVariant(String),

    #[error("checksum mismatch for example {id}")]
    Checksum { id: String },

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
