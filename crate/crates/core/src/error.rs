use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} has no density (assumption H1/H2 requires one)")]
    NoDensity(String),

    #[error("argument {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    /// A theorem hypothesis does not hold for the supplied model.
    #[error("hypothesis violated ({assumption}): {detail}")]
    Hypothesis {
        assumption: &'static str,
        detail: String,
    },

    #[error("renewal kernel is not defective: psi_J({shift}) = {value} >= 1")]
    NotDefective { shift: f64, value: f64 },

    #[error("sample sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn hypothesis(assumption: &'static str, detail: impl Into<String>) -> Error {
    Error::Hypothesis {
        assumption,
        detail: detail.into(),
    }
}
