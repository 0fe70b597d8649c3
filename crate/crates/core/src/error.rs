use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CassError>;

#[derive(Error, Debug)]
pub enum CassError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("localization training failed: {0}")]
    Training(String),

    #[error("classifier training failed for class `{class}`: {reason}")]
    ClassifierTraining { class: String, reason: String },

    #[error("block has no valid time-frequency units")]
    EmptyObservations,

    #[error("not enough observations: need at least {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("{0} requires non-empty input")]
    EmptyInput(&'static str),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("missing artifact `{}`: {hint}", path.display())]
    MissingArtifact { path: PathBuf, hint: String },

    #[error("I/O error on `{}`: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("WAV error: {0}")]
    Wav(#[from] hound::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CassError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CassError::Io {
            path: path.into(),
            source,
        }
    }
}
