//! Sigmoid feedforward network trained by backpropagation with momentum.
//!
//! Layers carry no bias terms; hidden nodes use the logistic function and
//! the output layer is linear. Weight corrections follow plain gradient
//! descent on the squared output error plus a momentum term driven by the
//! previous weight change.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Feedforward estimator; the gradient of each output with respect to the
/// regressor doubles as one row of the block gain matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpEstimator {
    /// `weights[l]` maps layer `l` activations to layer `l+1` inputs; the
    /// last entry is the linear readout.
    weights: Vec<DMatrix<f64>>,
    /// One update behind `weights`; drives the momentum term.
    weights_prev: Vec<DMatrix<f64>>,
    eta: f64,
    alpha: f64,
    /// Bumped on every parameter update; forward caches record it.
    generation: u64,
}

/// Cached forward pass: layer activations (entry 0 is the regressor) and
/// the network output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache {
    activations: Vec<DVector<f64>>,
    output: DVector<f64>,
    generation: u64,
}

impl MlpCache {
    pub fn output(&self) -> &DVector<f64> {
        &self.output
    }

    pub fn regressor(&self) -> &DVector<f64> {
        &self.activations[0]
    }
}

/// Outcome of offline training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfflineTrainingReport {
    pub epochs: usize,
    /// Summed half squared error over the final epoch.
    pub final_error: f64,
}

impl MlpEstimator {
    /// Builds the network from explicit weight matrices (input to output
    /// order). Adjacent shapes must chain.
    pub fn from_weights(weights: Vec<DMatrix<f64>>, eta: f64, alpha: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDimension(
                "network needs at least one layer".into(),
            ));
        }
        for pair in weights.windows(2) {
            if pair[1].ncols() != pair[0].nrows() {
                return Err(Error::InvalidDimension(format!(
                    "layer shapes {}x{} and {}x{} do not chain",
                    pair[0].nrows(),
                    pair[0].ncols(),
                    pair[1].nrows(),
                    pair[1].ncols()
                )));
            }
        }
        if weights.iter().any(|w| w.nrows() == 0 || w.ncols() == 0) {
            return Err(Error::InvalidDimension("empty weight matrix".into()));
        }
        check_rates(eta, alpha)?;
        let weights_prev = weights.clone();
        Ok(Self {
            weights,
            weights_prev,
            eta,
            alpha,
            generation: 0,
        })
    }

    /// Random network with weights uniform on [-1, 1]. `dims` lists the
    /// regressor length, the hidden widths and the output length.
    pub fn seeded<R: Rng>(dims: &[usize], eta: f64, alpha: f64, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidDimension(
                "need at least input and output dimensions".into(),
            ));
        }
        let weights = dims
            .windows(2)
            .map(|d| DMatrix::from_fn(d[1], d[0], |_, _| rng.gen_range(-1.0..=1.0)))
            .collect();
        Self::from_weights(weights, eta, alpha)
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().nrows()
    }

    pub fn hidden_layers(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn learning_rate(&self) -> f64 {
        self.eta
    }

    pub fn momentum(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    /// Linear readout plus cached hidden activations.
    pub fn forward(&self, regressor: &DVector<f64>) -> Result<(DVector<f64>, MlpCache)> {
        if regressor.len() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "regressor has length {}, network expects {}",
                regressor.len(),
                self.input_dim()
            )));
        }
        let hidden = self.hidden_layers();
        let mut activations = Vec::with_capacity(hidden + 1);
        activations.push(regressor.clone());
        for l in 0..hidden {
            let mut a = &self.weights[l] * &activations[l];
            a.apply(|v| *v = sigmoid(*v));
            activations.push(a);
        }
        let output = &self.weights[hidden] * &activations[hidden];
        let cache = MlpCache {
            activations,
            output: output.clone(),
            generation: self.generation,
        };
        Ok((output, cache))
    }

    fn check_cache(&self, cache: &MlpCache) -> Result<()> {
        if cache.generation != self.generation
            || cache.activations.len() != self.hidden_layers() + 1
            || cache.activations[0].len() != self.input_dim()
        {
            return Err(Error::StaleForwardCache);
        }
        Ok(())
    }

    /// Gradient of output `t` with respect to the regressor, i.e. row `t`
    /// of the estimated block gain matrix laid out `[B_1 ... B_L]`.
    pub fn pjm_row(&self, cache: &MlpCache, t: usize) -> Result<DVector<f64>> {
        self.check_cache(cache)?;
        if t >= self.output_dim() {
            return Err(Error::InvalidInput(format!(
                "output index {t} out of range (output dim {})",
                self.output_dim()
            )));
        }
        let hidden = self.hidden_layers();
        let mut row: DVector<f64> = self.weights[hidden].row(t).transpose();
        for l in (1..=hidden).rev() {
            let act = &cache.activations[l];
            for (r, a) in row.iter_mut().zip(act.iter()) {
                *r *= a * (1.0 - a);
            }
            let mut next = DVector::zeros(self.weights[l - 1].ncols());
            next.gemv_tr(1.0, &self.weights[l - 1], &row, 0.0);
            row = next;
        }
        Ok(row)
    }

    /// All output gradients stacked, `M_y x d`.
    pub fn input_jacobian(&self, cache: &MlpCache) -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(self.output_dim(), self.input_dim());
        for t in 0..self.output_dim() {
            let row = self.pjm_row(cache, t)?;
            jac.row_mut(t).copy_from(&row.transpose());
        }
        Ok(jac)
    }

    /// Applies one gradient-descent-with-momentum update for the given
    /// (already scaled) output errors against a cached forward pass.
    pub(crate) fn apply_update(
        &mut self,
        cache: &MlpCache,
        scaled_errors: &DVector<f64>,
    ) -> Result<()> {
        self.check_cache(cache)?;
        if scaled_errors.len() != self.output_dim() {
            return Err(Error::InvalidInput("error vector length mismatch".into()));
        }
        let hidden = self.hidden_layers();

        // Backpropagated signals per layer, output first.
        let mut deltas: Vec<DVector<f64>> = Vec::with_capacity(hidden + 1);
        deltas.push(scaled_errors.clone());
        for l in (1..=hidden).rev() {
            let upstream = deltas.last().unwrap();
            let mut back = DVector::zeros(self.weights[l].ncols());
            back.gemv_tr(1.0, &self.weights[l], upstream, 0.0);
            let act = &cache.activations[l];
            for (b, a) in back.iter_mut().zip(act.iter()) {
                *b *= a * (1.0 - a);
            }
            deltas.push(back);
        }
        deltas.reverse(); // deltas[l] now pairs with weights[l]

        for l in 0..=hidden {
            let mut new_w = if self.alpha != 0.0 {
                let mut m = self.weights[l].clone();
                let prev = &self.weights_prev[l];
                m.zip_apply(prev, |w, p| *w += self.alpha * (*w - p));
                m
            } else {
                self.weights[l].clone()
            };
            new_w.ger(self.eta, &deltas[l], &cache.activations[l], 1.0);
            self.weights_prev[l] = std::mem::replace(&mut self.weights[l], new_w);
        }
        self.generation += 1;
        Ok(())
    }

    /// One training step toward `target`; returns the pre-update output
    /// errors.
    pub fn train_step(
        &mut self,
        regressor: &DVector<f64>,
        target: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        self.train_step_weighted(regressor, target, None)
    }

    /// Training step with optional per-output error weights.
    pub fn train_step_weighted(
        &mut self,
        regressor: &DVector<f64>,
        target: &DVector<f64>,
        output_weights: Option<&DVector<f64>>,
    ) -> Result<DVector<f64>> {
        if target.len() != self.output_dim() || target.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "target must be finite and match the output dimension".into(),
            ));
        }
        if let Some(w) = output_weights {
            if w.len() != self.output_dim() {
                return Err(Error::InvalidInput("output weight length mismatch".into()));
            }
        }
        let (output, cache) = self.forward(regressor)?;
        let errors = target - output;
        let scaled = match output_weights {
            Some(w) => errors.component_mul(w),
            None => errors.clone(),
        };
        self.apply_update(&cache, &scaled)?;
        Ok(errors)
    }

    /// Full-dataset passes in presentation order until the per-epoch summed
    /// half squared error drops below `threshold`. Reaching `epoch_cap`
    /// first is a non-convergence error carrying the final error.
    pub fn train_offline(
        &mut self,
        data: &[(DVector<f64>, DVector<f64>)],
        threshold: f64,
        epoch_cap: usize,
    ) -> Result<OfflineTrainingReport> {
        if data.is_empty() {
            return Err(Error::InvalidInput("training dataset is empty".into()));
        }
        if !(threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        if epoch_cap == 0 {
            return Err(Error::InvalidParameter("epoch cap must be positive".into()));
        }
        let mut epoch_error = f64::INFINITY;
        for epoch in 1..=epoch_cap {
            epoch_error = 0.0;
            for (regressor, target) in data {
                let errors = self.train_step(regressor, target)?;
                epoch_error += 0.5 * errors.norm_squared();
            }
            if epoch_error < threshold {
                return Ok(OfflineTrainingReport {
                    epochs: epoch,
                    final_error: epoch_error,
                });
            }
        }
        Err(Error::NonConvergence {
            epochs: epoch_cap,
            final_error: epoch_error,
        })
    }
}

fn check_rates(eta: f64, alpha: f64) -> Result<()> {
    if !eta.is_finite() || !alpha.is_finite() {
        return Err(Error::InvalidParameter(
            "learning rate and momentum must be finite".into(),
        ));
    }
    Ok(())
}
