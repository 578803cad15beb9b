use thiserror::Error;

use crate::data::DataError;
use crate::glm::GlmError;
use crate::identification::IdentificationError;
use crate::inference::InferenceError;
use crate::profiles::ProfileError;
use crate::simulation::SimulationError;

/// Crate-wide error. Each layer has its own error type; this enum lets the
/// drivers (CLI, study harness) propagate any of them with `?`.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Identification(#[from] IdentificationError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Coarse classification used by the CLI to pick an exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Data(_) => ErrorKind::Data,
            Error::Glm(_) => ErrorKind::Fit,
            Error::Identification(e) if e.is_config() => ErrorKind::Config,
            Error::Identification(_) => ErrorKind::Data,
            Error::Inference(InferenceError::TooManyFailures { .. }) => ErrorKind::Fit,
            Error::Inference(_) => ErrorKind::Config,
            Error::Profile(_) => ErrorKind::Config,
            Error::Simulation(SimulationError::Config(_)) => ErrorKind::Config,
            Error::Simulation(_) => ErrorKind::Fit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Fit,
}
