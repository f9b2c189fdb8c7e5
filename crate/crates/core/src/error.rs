use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid BCH parameters: {0}")]
    InvalidCode(String),

    #[error("payload of {len} bits exceeds the {capacity}-bit capacity")]
    PayloadTooLarge { len: usize, capacity: usize },

    #[error("received word has {got} bits, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    /// The error-locator polynomial has no consistent root set.
    #[error("uncorrectable word: {0}")]
    Uncorrectable(String),

    #[error("unsupported audio format: {0}")]
    Format(String),

    #[error("frame has {got} samples, expected {expected}")]
    FrameSize { expected: usize, got: usize },

    #[error("carrier holds {available} samples, {needed} required")]
    CarrierTooShort { needed: usize, available: usize },

    #[error("no calibration entry for {0}")]
    CalibrationMiss(String),

    #[error("sync preamble not found within the search window")]
    SyncNotFound,

    #[error("delivery failed after {attempts} attempts")]
    DeliveryFailure { attempts: usize },

    #[error("key store: {0}")]
    KeyStore(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
