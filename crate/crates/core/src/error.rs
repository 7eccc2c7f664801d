use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid box length {box_len} is not an integer multiple of the modular scale {ell}")]
    Incommensurate { box_len: f64, ell: f64 },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("aliasing check failed: {0}")]
    Aliasing(String),

    #[error("observable {observable} is undefined for a {arity}-particle state")]
    Arity { observable: &'static str, arity: usize },

    #[error("root bracket failure: {0}")]
    BracketFailure(String),

    #[error("iteration did not converge after {0} steps")]
    NoConvergence(usize),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short tag used by the CLI and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite(_) => "non_finite",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Incommensurate { .. } => "incommensurate",
            Error::GridTooSmall(_) => "grid_too_small",
            Error::GridTooCoarse(_) => "grid_too_coarse",
            Error::Aliasing(_) => "aliasing",
            Error::Arity { .. } => "arity",
            Error::BracketFailure(_) => "bracket_failure",
            Error::NoConvergence(_) => "no_convergence",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
