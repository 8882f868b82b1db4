use thiserror::Error;

use crate::model::Regime;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The objective (or its gradient) evaluated to NaN or infinity.
    #[error("non-finite objective at {point:?}")]
    NonFinite { point: Vec<f64> },

    /// A regime receives no observations at the requested threshold.
    #[error("{regime} regime has no observations at threshold {threshold}")]
    IllPosedRegime { regime: Regime, threshold: u64 },

    /// No admissible estimate could be produced.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// The information matrix could not be inverted.
    #[error("information matrix is singular")]
    SingularInformation,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
