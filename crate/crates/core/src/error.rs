//! Error type shared across the control, estimation and analysis modules.

use std::fmt;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix or vector dimensions do not agree.
    InvalidDimension(String),
    /// Horizon configuration is inconsistent (e.g. control horizon exceeds
    /// the prediction horizon).
    InvalidHorizon(String),
    /// An input value is out of contract (wrong length, non-finite, ...).
    InvalidInput(String),
    /// A scalar parameter is out of range.
    InvalidParameter(String),
    /// The regularized normal matrix could not be factorized. `iteration`
    /// is set when the failure happened inside an iterative solve.
    SingularSystem { iteration: Option<usize> },
    /// The characteristic determinant is identically zero.
    DegenerateSystem,
    /// The characteristic matrix is singular at z = 1; no static-error
    /// limit exists.
    MarginalSystem,
    /// A cached forward pass no longer matches the network parameters.
    StaleForwardCache,
    /// The plant returned a non-finite output while perturbing the given
    /// lag index.
    PlantEvaluation { lag: usize },
    /// Offline training hit the epoch cap before reaching the target error.
    NonConvergence { epochs: usize, final_error: f64 },
    /// The weight-tuning iteration produced a non-finite value at `step`.
    TunerDiverged { step: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidDimension(msg) => write!(f, "invalid dimension: {msg}"),
            Self::InvalidHorizon(msg) => write!(f, "invalid horizon: {msg}"),
            Self::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Self::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Self::SingularSystem { iteration: Some(i) } => {
                write!(f, "singular normal matrix at iteration {i}")
            }
            Self::SingularSystem { iteration: None } => write!(f, "singular normal matrix"),
            Self::DegenerateSystem => write!(f, "characteristic determinant is identically zero"),
            Self::MarginalSystem => write!(f, "characteristic matrix singular at z = 1"),
            Self::StaleForwardCache => {
                write!(f, "forward cache is stale; rerun the forward pass")
            }
            Self::PlantEvaluation { lag } => {
                write!(
                    f,
                    "plant returned a non-finite output while perturbing lag {lag}"
                )
            }
            Self::NonConvergence {
                epochs,
                final_error,
            } => write!(
                f,
                "training did not converge after {epochs} epochs (final error {final_error:e})"
            ),
            Self::TunerDiverged { step } => {
                write!(f, "weight tuner produced a non-finite value at step {step}")
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
