use thiserror::Error;

/// Errors raised by mesh construction, assembly, solving and the run driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("element {element}: Gram matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    GramNotSpd { element: usize, row: usize, pivot: f64 },

    #[error("dof map inconsistency: {0}")]
    DofMap(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
