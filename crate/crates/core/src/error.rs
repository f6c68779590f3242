use thiserror::Error;

/// Failure modes shared by every solver in the crate.
///
/// `Structural` is reserved for outcomes where the computed geometry
/// disagrees with the structure predicted by the theory (wrong number of
/// fiber critical points, misordered zeros, a run leaving its admissible
/// region). Callers treat it differently from plain numerical trouble.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {what} (achieved tolerance {achieved:.3e})")]
    Numeric { what: String, achieved: f64 },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("structural error: {0}")]
    Structural(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(what: impl Into<String>, achieved: f64) -> Self {
        Error::Numeric {
            what: what.into(),
            achieved,
        }
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
