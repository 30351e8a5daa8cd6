use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh file line {line}: {msg}")]
    MeshFormat { line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible spaces: {0}")]
    Incompatible(String),

    #[error("reference element is not unisolvent: {0}")]
    NotUnisolvent(String),

    #[error("singular system: pivot {pivot:e} at row {row} below threshold {threshold:e}")]
    SingularSystem { row: usize, pivot: f64, threshold: f64 },

    #[error("relative residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("dimension {n} exceeds the dense limit {limit}")]
    DimensionCap { n: usize, limit: usize },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("level n = {n}: {source}")]
    AtLevel {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Singular or inaccurate linear solve, possibly wrapped in a level.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::SingularSystem { .. } | Error::ResidualTooLarge { .. } | Error::LinearAlgebra(_) => true,
            Error::AtLevel { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
