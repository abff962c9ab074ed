use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("unknown {registry} `{name}` (known: {known})")]
    UnknownStrategy {
        registry: &'static str,
        name: String,
        known: String,
    },

    #[error("risk-neutral probability {p} outside (0,1); dt is too coarse for sigma and r")]
    ProbabilityOutOfRange { p: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid lattice model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("model has {cells} policy cells, enumeration limit is {max}")]
    ModelTooLarge { cells: usize, max: usize },

    #[error("analytic value requires an indicator model, got `{0}`")]
    NotIndicator(String),

    #[error("infeasible control at step {step}, node {node}: exercise with no volume left")]
    InfeasibleControl { step: usize, node: usize },

    #[error("at least 2 paths are required for a standard error, got {0}")]
    TooFewPaths(usize),

    #[error("malformed surface file: {0}")]
    SurfaceFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
