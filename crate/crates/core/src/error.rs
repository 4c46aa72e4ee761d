use thiserror::Error;

/// Eigenpairs that did reach tolerance before the solver gave up.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSpectrum {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("eigensolver did not converge: {converged} of {requested} pairs after {iterations} iterations")]
    EigenNotConverged {
        requested: usize,
        converged: usize,
        iterations: usize,
        partial: PartialSpectrum,
    },

    #[error("decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
