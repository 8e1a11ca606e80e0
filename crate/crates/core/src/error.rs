use thiserror::Error;

use crate::inversion::ParameterEstimate;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("scheme does not match the trajectory grid: {0}")]
    SchemeGridMismatch(String),

    #[error("insufficient data: need {required} samples, have {available}")]
    InsufficientData { required: usize, available: usize },

    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("simulation diverged at step {step}")]
    SimulationDiverged { step: usize },

    #[error("scheme too short for lag: N = {n_obs} < 10 * kappa = {}", 10 * kappa)]
    SchemeTooShortForLag { n_obs: usize, kappa: usize },

    #[error("moments outside model range: {0}")]
    MomentsOutsideModelRange(String),

    #[error("solver did not converge after {} iterations", estimate.diagnostics.iterations)]
    SolverDidNotConverge { estimate: Box<ParameterEstimate> },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("invalid trajectory grid: {0}")]
    InvalidGrid(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid file format: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Broad failure classes; the CLI maps them onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Data,
    Numerical,
}

impl Error {
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::ParameterDomain(_) | Error::Config(_) | Error::InvalidGrid(_) => {
                ErrorClass::Validation
            }
            Error::SchemeGridMismatch(_)
            | Error::InsufficientData { .. }
            | Error::SchemeTooShortForLag { .. }
            | Error::ResourceLimit(_)
            | Error::Format(_)
            | Error::Io(_) => ErrorClass::Data,
            Error::SimulationDiverged { .. }
            | Error::MomentsOutsideModelRange(_)
            | Error::SolverDidNotConverge { .. } => ErrorClass::Numerical,
            Error::Context { source, .. } => source.class(),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
