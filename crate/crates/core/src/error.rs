use thiserror::Error;

#[derive(Debug, Error)]
pub enum GkgError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GkgError>;
