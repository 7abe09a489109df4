use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("skeleton definition error: {0}")]
    Skeleton(String),
    #[error("invalid pose: {0}")]
    Pose(String),
    #[error("scene synthesis failed: {0}")]
    Scene(String),
    #[error("training error: {0}")]
    Train(String),
    #[error("model error: {0}")]
    Model(String),
    #[error(transparent)]
    Numeric(#[from] diffnum::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
