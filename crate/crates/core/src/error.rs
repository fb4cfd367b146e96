use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid process spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient pre-sample innovations: need {needed}, got {got}")]
    InsufficientPresample { needed: usize, got: usize },

    #[error("non-finite value {value} at t = {t}")]
    NonFinite { t: usize, value: f64 },

    #[error("zero kernel mass at x = {x}")]
    ZeroKernelMass { x: f64 },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("evaluation point {index} (x = {x}): {source}")]
    AtPoint {
        index: usize,
        x: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("cell {cell}: {failures} of {reps} replications failed (first: {first})")]
    TooManyFailures {
        cell: String,
        failures: usize,
        reps: usize,
        first: String,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or configuration).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. }
            | Error::ZeroKernelMass { .. }
            | Error::SingularDesign(_)
            | Error::Degenerate(_)
            | Error::Quadrature(_)
            | Error::TooManyFailures { .. } => true,
            Error::AtPoint { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
