use thiserror::Error;

/// Errors raised by every module of the crate.
///
/// The variants split into two families that the CLI maps onto distinct exit
/// codes: input problems (`InvalidParameter`, `Domain`, `Rejected`) and
/// numerical failures (`Singular`, `NoBracket`, `Pole`).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear system is numerically singular (one-norm condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("root not bracketed on ({lo:e}, {hi:e}): {what}")]
    NoBracket { lo: f64, hi: f64, what: &'static str },

    #[error("residual evaluated at a pole: {0}")]
    Pole(String),

    #[error("rejected: {0}")]
    Rejected(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::NoBracket { .. } | Error::Pole(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
