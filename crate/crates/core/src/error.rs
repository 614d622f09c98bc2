use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("random graph on {nodes} nodes needs at least {required} edges, budget allows {budget}")]
    EdgeBudget {
        nodes: usize,
        budget: usize,
        required: usize,
    },

    #[error("graph is not connected: {zero_modes} zero eigenvalues of I - W")]
    Disconnected { zero_modes: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid mixing matrix: {0}")]
    InvalidMixing(String),

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("local system at node {node} is not positive definite")]
    NotPositiveDefinite { node: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("curvature bounds unavailable for objective at node {node}")]
    UnknownBounds { node: usize },

    #[error("certificate is infeasible: lambda_min(Q) = {q_min} must exceed 4 L^2 / mu = {threshold}")]
    Infeasible { q_min: f64, threshold: f64 },

    #[error("reference solver stopped after {iterations} iterations with gradient norm {residual:e}")]
    ReferenceFailed { iterations: usize, residual: f64 },

    #[error("cannot fit a linear rate: {0}")]
    RateFit(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag, used in the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::EdgeBudget { .. } => "edge_budget",
            Error::Disconnected { .. } => "disconnected",
            Error::InvalidGraph(_) => "invalid_graph",
            Error::InvalidMixing(_) => "invalid_mixing",
            Error::NotSymmetric => "not_symmetric",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UnknownBounds { .. } => "unknown_bounds",
            Error::Infeasible { .. } => "infeasible",
            Error::ReferenceFailed { .. } => "reference_failed",
            Error::RateFit(_) => "rate_fit",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::Context { source, .. } => source.kind(),
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}
