use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{what} index {index:?} out of range")]
    IndexOutOfRange { what: &'static str, index: Vec<usize> },

    #[error("shear pair ({0}, {1}) is not canonical (need i < j < dim)")]
    NonCanonicalPair(usize, usize),

    #[error("unsupported Gauss order {0} (supported: 1..=5)")]
    UnsupportedQuadrature(usize),

    #[error("inadmissible material: lambda = {lambda}, mu = {mu} (both must be positive)")]
    InvalidMaterial { lambda: f64, mu: f64 },

    #[error("degenerate cell: half-length {0} along an axis")]
    DegenerateCell(f64),

    #[error("unknown manufactured solution '{0}' (expected e1, e2, e3 or traction)")]
    UnknownSolution(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("field layouts differ")]
    LayoutMismatch,

    #[error("shape mismatch: expected length {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("system is singular{0}")]
    Singular(String),

    #[error("dense problem of size {size} exceeds the limit {limit}")]
    DenseTooLarge { size: usize, limit: usize },

    #[error("solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
