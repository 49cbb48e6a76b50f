use thiserror::Error;

#[derive(Debug, Error)]
pub enum LuvaError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate network: every direct gain is zero")]
    DegenerateNetwork,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training aborted: {0}")]
    TrainingAborted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LuvaError>;
