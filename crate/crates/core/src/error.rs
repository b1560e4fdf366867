use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate cell {cell}: jacobian area factor {area_factor:e}")]
    DegenerateCell { cell: usize, area_factor: f64 },

    #[error("quadrature degree {0} is not supported")]
    UnsupportedQuadrature(usize),

    #[error("reference element construction failed: {0}")]
    Element(String),

    #[error("depth is not positive: {value:e} in cell {cell}")]
    Positivity { cell: usize, value: f64 },

    #[error("linear solve failed: {reason} (relative residual {residual:e})")]
    Solver { reason: String, residual: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
