use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("hypothesis regime rejected: {0}")]
    Regime(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("profile contains a non-finite value at node {0}")]
    NonFinite(usize),

    #[error("negative profile value {value:e} at node {node}")]
    NegativeInput { node: usize, value: f64 },

    #[error("component {0} has zero mass")]
    ZeroMass(usize),

    #[error("missing Gagliardo-Nirenberg data: {0}")]
    GnUnavailable(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e}): {context}")]
    NoConvergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    #[error("iterate left the ball B(2 rho0): kinetic sum {kinetic:e} >= {bound:e}")]
    ExitedBall { kinetic: f64, bound: f64 },

    #[error("mountain-pass path collapsed: peak {peak:e} does not exceed endpoint level {endpoint:e}")]
    PathCollapse { peak: f64, endpoint: f64 },

    #[error("geometry check failed: {0}")]
    Geometry(String),

    #[error("blow-up detected at t = {time}: sup norm {sup:e}")]
    BlowUp { time: f64, sup: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// Process exit status used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParameter { .. } => 1,
            Error::Regime(_) => 3,
            _ => 2,
        }
    }
}
