use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("invalid sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("solver state is stale: caller weights differ from represented weights (max rel. diff {max_rel_diff:e})")]
    StaleState { max_rel_diff: f64 },

    #[error("iterative refinement did not converge after {iterations} iterations (rel. residual {residual:e})")]
    SolveDidNotConverge { iterations: usize, residual: f64 },

    #[error("point is not in the interior: slack {slack:e} at row {row}")]
    NotInterior { row: usize, slack: f64 },

    #[error("dimension {d} unsupported (maximum {max})")]
    UnsupportedDimension { d: usize, max: usize },

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("target function returned non-finite value {value} at step {step}")]
    TargetEvaluation { value: f64, step: u64 },

    #[error("configuration error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("validation unsupported: {0}")]
    UnsupportedValidation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
