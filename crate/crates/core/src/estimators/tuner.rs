//! Online adaptation of the controller's move weights.
//!
//! A feedforward network takes the current move-weight vector as its
//! regressor and predicts the plant outputs. Each step trains the network
//! on the measured outputs, then descends the same weighted output error
//! with respect to the regressor itself, producing the next weight vector.
//! Entries may go negative; the loop analysis decides whether that is
//! admissible, not the tuner.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::mlp::MlpEstimator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaTuner {
    net: MlpEstimator,
    /// Per-output cost weights in the tuning index.
    cost_weights: DVector<f64>,
    /// Descent rate for the move-weight iteration (the network keeps its
    /// own rates).
    eta: f64,
    /// Momentum for the move-weight iteration.
    alpha: f64,
    lambda_prev: Option<DVector<f64>>,
    lambda_prev2: Option<DVector<f64>>,
    steps: usize,
}

impl LambdaTuner {
    pub fn new(
        net: MlpEstimator,
        cost_weights: DVector<f64>,
        eta: f64,
        alpha: f64,
    ) -> Result<Self> {
        if cost_weights.len() != net.output_dim() {
            return Err(Error::InvalidDimension(format!(
                "{} cost weights for a {}-output network",
                cost_weights.len(),
                net.output_dim()
            )));
        }
        if !eta.is_finite() || !alpha.is_finite() {
            return Err(Error::InvalidParameter("tuner rates must be finite".into()));
        }
        Ok(Self {
            net,
            cost_weights,
            eta,
            alpha,
            lambda_prev: None,
            lambda_prev2: None,
            steps: 0,
        })
    }

    pub fn network(&self) -> &MlpEstimator {
        &self.net
    }

    pub fn lambda_len(&self) -> usize {
        self.net.input_dim()
    }

    /// One adaptation step: trains the network on the measured outputs and
    /// returns the next move-weight vector.
    pub fn tune_step(&mut self, lambda: &DVector<f64>, y_k: &DVector<f64>) -> Result<DVector<f64>> {
        if lambda.len() != self.net.input_dim() {
            return Err(Error::InvalidDimension(format!(
                "weight vector has length {}, network expects {}",
                lambda.len(),
                self.net.input_dim()
            )));
        }
        if y_k.len() != self.net.output_dim() || y_k.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "measured outputs must be finite and match the network".into(),
            ));
        }
        self.steps += 1;

        let (prediction, cache) = self.net.forward(lambda)?;
        let errors = y_k - prediction;
        let scaled = errors.component_mul(&self.cost_weights);

        // Both gradients are taken at the same forward pass: the regressor
        // gradient first, then the weight update.
        let jacobian = self.net.input_jacobian(&cache)?;
        let mut grad = DVector::zeros(lambda.len());
        grad.gemv_tr(-1.0, &jacobian, &scaled, 0.0);
        self.net.apply_update(&cache, &scaled)?;

        let mut next = lambda - self.eta * grad;
        if self.alpha != 0.0 {
            if let (Some(prev), Some(prev2)) = (&self.lambda_prev, &self.lambda_prev2) {
                next += self.alpha * (prev - prev2);
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::TunerDiverged { step: self.steps });
        }
        self.lambda_prev2 = self.lambda_prev.take();
        self.lambda_prev = Some(lambda.clone());
        Ok(next)
    }
}
