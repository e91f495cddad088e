use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degree sequence is not graphical: {0}")]
    NotGraphical(String),

    #[error("vertex {vertex} has out-degree zero")]
    ZeroOutDegree { vertex: usize },

    #[error("graph is not strongly connected ({components} components)")]
    NotStronglyConnected { components: usize },

    #[error("power iteration did not converge after {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },

    #[error("stationary residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("event cap of {cap} exceeded ({context})")]
    EventCap { cap: u64, context: String },

    #[error("graph too large for {what}: n = {n}, limit {limit}")]
    TooLarge { what: &'static str, n: usize, limit: usize },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("experiment interrupted after {completed} tasks; resume token {token}: {source}")]
    Interrupted {
        completed: usize,
        token: String,
        #[source]
        source: Box<Error>,
    },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
