use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("singular matrix: pivot {pivot:e} in column {column} below threshold")]
    SingularMatrix { pivot: f64, column: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("scenario {index}: Q2/S2 not positive definite after {attempts} draws")]
    IndefiniteScenario { index: usize, attempts: usize },

    #[error("{solver}: no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// LU failure inside a Newton step; carries the iterate that produced it.
    #[error("singular generalized Jacobian (pivot {pivot:e}, column {column}) at mu = {mu:?}")]
    SingularJacobian {
        pivot: f64,
        column: usize,
        mu: Vec<f64>,
    },

    #[error("line search failed to find an Armijo step (residual {residual:e})")]
    LineSearch { residual: f64 },

    #[error("extragradient oracle requires W = (I, 0) and B = (I, 0)")]
    UnsupportedStructure,

    #[error("outer iteration {iteration}, scenario {scenario}: {source}")]
    Inner {
        iteration: usize,
        scenario: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("nothing to plot: {0}")]
    EmptyPlot(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Strips `Inner` wrappers down to the originating error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Inner { source, .. } => source.root(),
            e => e,
        }
    }
}
