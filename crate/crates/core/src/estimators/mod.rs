//! Neural estimation of the incremental-model block gains.
//!
//! Two network families identify the plant map from input/output data: a
//! sigmoid feedforward network trained by backpropagation with momentum,
//! and a Gaussian radial-basis network trained online. Both expose the
//! analytic gradient of their output with respect to the regressor, which
//! reshapes directly into the rows of the block gain matrix. A third
//! component reuses the feedforward machinery to adapt the controller's
//! move weights online.

mod checkpoint;
mod gradcheck;
mod mlp;
mod rbf;
mod tuner;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointError, ModelCheckpoint, CHECKPOINT_VERSION,
};
pub use gradcheck::{mlp_gradient_check, rbf_gradient_check, GradCheckReport, GRADCHECK_TOLERANCE};
pub use mlp::{MlpCache, MlpEstimator, OfflineTrainingReport};
pub use rbf::{RbfCache, RbfEstimator, RbfStepReport};
pub use tuner::LambdaTuner;

use nalgebra::{DMatrix, DVector};

use crate::edlm::PseudoJacobianMatrix;
use crate::error::{Error, Result};

/// How the network regressor is assembled from plant histories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressorMode {
    /// Lagged inputs only: `[u(k-1); ...; u(k-L)]`.
    InputLags { lags: usize },
    /// Lagged outputs then lagged inputs:
    /// `[y(k-1); ...; y(k-Ly); u(k-1); ...; u(k-Lu)]`.
    InputOutputLags {
        output_lags: usize,
        input_lags: usize,
    },
}

impl RegressorMode {
    pub fn len(&self, input_dim: usize, output_dim: usize) -> usize {
        match self {
            RegressorMode::InputLags { lags } => lags * input_dim,
            RegressorMode::InputOutputLags {
                output_lags,
                input_lags,
            } => output_lags * output_dim + input_lags * input_dim,
        }
    }
}

/// Stacks plant histories (newest first) into a regressor vector.
pub fn build_regressor(
    mode: RegressorMode,
    inputs: &[DVector<f64>],
    outputs: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let (y_lags, u_lags) = match mode {
        RegressorMode::InputLags { lags } => (0, lags),
        RegressorMode::InputOutputLags {
            output_lags,
            input_lags,
        } => (output_lags, input_lags),
    };
    if inputs.len() < u_lags || outputs.len() < y_lags {
        return Err(Error::InvalidInput(format!(
            "need {u_lags} input and {y_lags} output lags, have {} and {}",
            inputs.len(),
            outputs.len()
        )));
    }
    let mut parts: Vec<f64> = Vec::new();
    for y in &outputs[..y_lags] {
        parts.extend(y.iter().copied());
    }
    for u in &inputs[..u_lags] {
        parts.extend(u.iter().copied());
    }
    if parts.is_empty() {
        return Err(Error::InvalidInput("regressor would be empty".into()));
    }
    Ok(DVector::from_vec(parts))
}

/// Reshapes stacked gradient rows (one per output, `L*M_u` entries each)
/// into the block gain matrix.
pub fn rows_to_pjm(rows: &DMatrix<f64>, input_dim: usize) -> Result<PseudoJacobianMatrix> {
    if input_dim == 0 || !rows.ncols().is_multiple_of(input_dim) {
        return Err(Error::InvalidDimension(format!(
            "{} gradient columns do not split into blocks of {input_dim}",
            rows.ncols()
        )));
    }
    let l = rows.ncols() / input_dim;
    let blocks = (0..l)
        .map(|i| DMatrix::from(rows.view((0, i * input_dim), (rows.nrows(), input_dim))))
        .collect();
    PseudoJacobianMatrix::new(blocks)
}
