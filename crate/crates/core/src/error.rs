use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value outside the covered domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Gram matrix of the design is (numerically) rank deficient.
    #[error("singular design: pivot {pivot} fell below tolerance at column {column}")]
    SingularDesign { column: usize, pivot: f64 },

    #[error("inverse-gamma shape {0} has no finite variance (needs > 2)")]
    NoFiniteVariance(f64),

    /// The model reproduces the data exactly, so the noise posterior is improper.
    #[error("degenerate fit: b_tilde = {0}")]
    DegenerateFit(f64),

    #[error("chain stalled at iteration {iteration} after {restarts} non-negativity restarts")]
    StalledChain { iteration: usize, restarts: usize },

    #[error("incompatible grids: {0}")]
    IncompatibleGrid(String),

    #[error("empty result: {0}")]
    Empty(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come out of the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularDesign { .. } | Error::DegenerateFit(_) | Error::StalledChain { .. }
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
