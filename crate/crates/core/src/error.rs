use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported measurement setting: {0}")]
    UnsupportedSetting(String),

    #[error("invalid subsystem: {0}")]
    InvalidSubsystem(String),

    #[error("observable acts outside the subsystem: {0}")]
    NotSupportedOnSubsystem(String),

    #[error("{n_qubits} qubits is too large for a dense representation (limit {limit})")]
    TooLargeForDense { n_qubits: usize, limit: usize },

    #[error("too large: {0}")]
    TooLarge(String),

    #[error("calibration parameter G[{site}] = {value} outside the accepted range")]
    CalibrationOutOfRange { site: usize, value: f64 },

    #[error("unsupported reference state: {0}")]
    UnsupportedReferenceState(String),

    #[error("need at least {needed} batches, got {got}")]
    NotEnoughBatches { needed: usize, got: usize },

    #[error("need at least {needed} shots per setting, got {got}")]
    NotEnoughShots { needed: usize, got: usize },

    #[error("need at least {needed} samples, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("measurement settings differ between groups: {0}")]
    SettingsMismatch(String),

    #[error("channel is not invertible: {0}")]
    ChannelNotInvertible(String),

    #[error("circuit ensemble mismatch: {0}")]
    EnsembleMismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: String, reason: String },
}
