//! Error and result types shared across the crate.

use thiserror::Error;

/// Errors produced by signal construction, identification, interpolation
/// and the pipeline stages.
#[derive(Debug, Error)]
pub enum RomError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<RomError>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl RomError {
    /// Wraps an error with the name of the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        RomError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, RomError>;
