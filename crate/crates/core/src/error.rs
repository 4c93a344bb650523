use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its valid domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two objects that must agree in size do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// The requested radar direction lies in the span of the user channel
    /// estimates, so no zero-forcing beam exists.
    #[error("radar direction lies in the estimated user-channel subspace (residual norm {residual:e})")]
    DegenerateDirection { residual: f64 },

    /// The power allocation problem has no feasible point with positive
    /// minimum SINR.
    #[error("power allocation infeasible: {0}")]
    Infeasible(String),

    /// The linear feasibility solver hit its iteration limit.
    #[error("linear feasibility solver did not converge after {iterations} pivots")]
    SolverStalled { iterations: usize },

    /// A quantity that must be real, finite, Hermitian or non-negative is not.
    #[error("numerical consistency failure: {0}")]
    Numerical(String),

    /// Configuration could not be parsed or is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
