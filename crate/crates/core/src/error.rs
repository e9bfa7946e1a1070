use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric degeneracy on {axis} axis: {detail}")]
    NumericDegeneracy { axis: &'static str, detail: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource budget exceeded: {0}")]
    Resource(String),

    #[error("quadrature accuracy failure: {0}")]
    Accuracy(String),

    #[error("config validation failed:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
