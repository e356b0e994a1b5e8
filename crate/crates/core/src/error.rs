use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value encountered in {context}")]
    NonFiniteData { context: &'static str },

    #[error("point ({x}, {y}) lies outside the mesh")]
    PointOutsideDomain { x: f64, y: f64 },

    #[error("mesh topology error: {0}")]
    MeshTopology(String),

    #[error("active-set iteration did not reach a fixed point within {iterations} iterations")]
    SolverDiverged { iterations: usize },

    #[error("conjugate gradient failed: {0}")]
    LinearSolveFailure(String),

    #[error("oracle enumeration needs {boundary} boundary vertices, limit is {limit}")]
    OracleTooLarge { boundary: usize, limit: usize },

    #[error("input function is negative ({value:e}) at a sample point")]
    NegativeInput { value: f64 },

    #[error("input function is positive ({value:e}) at a sample point")]
    PositiveInput { value: f64 },

    #[error("singular linear system while building {0}")]
    SingularSystem(&'static str),

    #[error("manufactured solution has no exact solution")]
    NoExactSolution,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("configuration error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
