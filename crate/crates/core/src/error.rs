use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rectangle: {0}")]
    InvalidDomain(String),

    #[error("slope {0} lies outside [-1, 1]")]
    SlopeOutOfRange(f64),

    #[error("point ({x}, {y}) lies outside the rectangle")]
    OutOfDomain { x: f64, y: f64 },

    #[error("invalid alpha field: {0}")]
    InvalidField(String),

    #[error("alpha = {value} at ({x}, {y}) is below the required positive minimum")]
    NonPositiveAlpha { x: f64, y: f64, value: f64 },

    #[error("invalid lattice: {0}")]
    Lattice(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid discretization: {0}")]
    Discretization(String),

    #[error("TASEP window overrun: {0}")]
    WindowOverrun(String),

    #[error("invalid TASEP configuration: {0}")]
    Tasep(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::WindowOverrun(_) | Error::NonPositiveAlpha { .. } => 3,
            _ => 2,
        }
    }
}
