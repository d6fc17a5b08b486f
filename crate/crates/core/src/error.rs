use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot mesh: {0}")]
    Mesh(String),

    /// A kernel was evaluated on the diagonal; callers must go through a diagonal policy.
    #[error("singular kernel evaluation at coincident points")]
    SingularEvaluation,

    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: [f64; 3] },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("weak energy requires a density; atomic measures have infinite weak energy")]
    AtomicMeasure,

    #[error("{nodes} nodes need {bytes} bytes for a dense matrix, above the {limit} byte limit")]
    MemoryBound { nodes: usize, bytes: usize, limit: usize },

    #[error("resolution too coarse: {0}")]
    Resolution(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("scenario error at {location}: {message}")]
    Scenario { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
