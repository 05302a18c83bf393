use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("requested {requested} modes but the domain holds only {available}")]
    Capacity { requested: usize, available: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value at index {index}: {message}")]
    Numeric { index: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical instability at step {step}: sup-norm {value:e} exceeds {bound:e}")]
    Instability { step: usize, value: f64, bound: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error(
        "regression ill-conditioned at step {step}: condition number {condition:e}; \
         reduce basis_modes or disable quadratic features"
    )]
    Regression { step: usize, condition: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}
