use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unsupported distribution kind `{0}`: payoffs must have a finite moment generating function everywhere (bernoulli, discrete, uniform, gaussian, mixed)")]
    UnsupportedKind(String),

    #[error("cannot parse distribution spec `{spec}`: {reason}")]
    Parse { spec: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge: error bound {error_bound:.3e} after {intervals} intervals")]
    QuadratureNonConvergence { error_bound: f64, intervals: usize },

    #[error("tilting parameter for x = {x} could not be bracketed within |t| <= {limit}")]
    DomainOverflow { x: f64, limit: f64 },

    #[error("level {level} is never crossed: {reason}")]
    Bracketing { level: f64, reason: String },

    #[error("capacity exceeded: n = {n} needs {required_bytes} bytes of payoff storage, budget is {budget_bytes} bytes (raise with --mem-cap or RGL_MEM_CAP_BYTES)")]
    Capacity { n: usize, required_bytes: u64, budget_bytes: u64 },

    #[error("check refused: {0}")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid_arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_dist(msg: impl Into<String>) -> Self {
        Error::InvalidDistribution(msg.into())
    }

    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}
