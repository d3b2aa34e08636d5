use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error("search budget exhausted: {0}")]
    NotFound(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
