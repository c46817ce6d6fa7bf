//! Gaussian radial-basis network with online gradient training.
//!
//! Hidden node `j` fires `exp(-||x - c_j||^2 / (2 b_j^2))`; a linear
//! readout mixes the activations per output. Centers, radii and readout
//! weights all descend the squared output error with the same momentum
//! rule as the feedforward network. Radii are clamped to a small positive
//! floor rather than allowed through zero.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible radius; training updates are clamped here.
pub const RADIUS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfEstimator {
    /// Node centers, one per hidden node, each of regressor length.
    centers: Vec<DVector<f64>>,
    radii: DVector<f64>,
    /// Readout weights, `M_y x m`.
    weights: DMatrix<f64>,
    centers_prev: Vec<DVector<f64>>,
    radii_prev: DVector<f64>,
    weights_prev: DMatrix<f64>,
    eta: f64,
    alpha: f64,
    generation: u64,
}

/// Cached forward pass: node activations for one regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfCache {
    regressor: DVector<f64>,
    activations: DVector<f64>,
    generation: u64,
}

impl RbfCache {
    pub fn activations(&self) -> &DVector<f64> {
        &self.activations
    }
}

/// Outcome of one online training step.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfStepReport {
    /// Pre-update output errors.
    pub errors: DVector<f64>,
    /// Some radius hit the positive floor during the update.
    pub radius_clamped: bool,
}

impl RbfEstimator {
    pub fn new(
        centers: Vec<DVector<f64>>,
        radii: DVector<f64>,
        weights: DMatrix<f64>,
        eta: f64,
        alpha: f64,
    ) -> Result<Self> {
        let m = centers.len();
        if m == 0 {
            return Err(Error::InvalidDimension(
                "need at least one hidden node".into(),
            ));
        }
        let dim = centers[0].len();
        if dim == 0 || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidDimension(
                "centers must share one positive length".into(),
            ));
        }
        if radii.len() != m {
            return Err(Error::InvalidDimension(
                "one radius per node required".into(),
            ));
        }
        if radii.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::InvalidParameter(
                "radii must be strictly positive".into(),
            ));
        }
        if weights.ncols() != m || weights.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "readout weights are {}x{}, expected outputs x {m}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if !eta.is_finite() || !alpha.is_finite() {
            return Err(Error::InvalidParameter(
                "learning rate and momentum must be finite".into(),
            ));
        }
        Ok(Self {
            centers_prev: centers.clone(),
            radii_prev: radii.clone(),
            weights_prev: weights.clone(),
            centers,
            radii,
            weights,
            eta,
            alpha,
            generation: 0,
        })
    }

    /// Uniform initialization: identical small centers, unit radii and a
    /// random readout on [-1, 1].
    pub fn seeded<R: Rng>(
        nodes: usize,
        input_dim: usize,
        output_dim: usize,
        eta: f64,
        alpha: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let centers = vec![DVector::from_element(input_dim, 0.01); nodes];
        let radii = DVector::from_element(nodes, 1.0);
        let weights = DMatrix::from_fn(output_dim, nodes, |_, _| rng.gen_range(-1.0..=1.0));
        Self::new(centers, radii, weights, eta, alpha)
    }

    pub fn input_dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn nodes(&self) -> usize {
        self.centers.len()
    }

    pub fn radii(&self) -> &DVector<f64> {
        &self.radii
    }

    pub fn forward(&self, regressor: &DVector<f64>) -> Result<(DVector<f64>, RbfCache)> {
        if regressor.len() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "regressor has length {}, network expects {}",
                regressor.len(),
                self.input_dim()
            )));
        }
        let activations = DVector::from_fn(self.nodes(), |j, _| {
            let d2 = (regressor - &self.centers[j]).norm_squared();
            (-d2 / (2.0 * self.radii[j] * self.radii[j])).exp()
        });
        let output = &self.weights * &activations;
        let cache = RbfCache {
            regressor: regressor.clone(),
            activations,
            generation: self.generation,
        };
        Ok((output, cache))
    }

    fn check_cache(&self, cache: &RbfCache) -> Result<()> {
        if cache.generation != self.generation
            || cache.regressor.len() != self.input_dim()
            || cache.activations.len() != self.nodes()
        {
            return Err(Error::StaleForwardCache);
        }
        Ok(())
    }

    /// Gradient of output `t` with respect to the regressor:
    /// `-sum_j w_tj R_j (x - c_j) / b_j^2`.
    pub fn pjm_row(&self, cache: &RbfCache, t: usize) -> Result<DVector<f64>> {
        self.check_cache(cache)?;
        if t >= self.output_dim() {
            return Err(Error::InvalidInput(format!(
                "output index {t} out of range (output dim {})",
                self.output_dim()
            )));
        }
        let mut row = DVector::zeros(self.input_dim());
        for j in 0..self.nodes() {
            let scale =
                -self.weights[(t, j)] * cache.activations[j] / (self.radii[j] * self.radii[j]);
            row.axpy(scale, &(&cache.regressor - &self.centers[j]), 1.0);
        }
        Ok(row)
    }

    pub fn input_jacobian(&self, cache: &RbfCache) -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(self.output_dim(), self.input_dim());
        for t in 0..self.output_dim() {
            let row = self.pjm_row(cache, t)?;
            jac.row_mut(t).copy_from(&row.transpose());
        }
        Ok(jac)
    }

    /// One descent step on all parameters toward `target`.
    pub fn train_step(
        &mut self,
        regressor: &DVector<f64>,
        target: &DVector<f64>,
    ) -> Result<RbfStepReport> {
        if target.len() != self.output_dim() || target.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "target must be finite and match the output dimension".into(),
            ));
        }
        let (output, cache) = self.forward(regressor)?;
        let errors = target - output;

        // Per-node error mix s_j = sum_t e_t w_tj.
        let mut node_err = DVector::zeros(self.nodes());
        node_err.gemv_tr(1.0, &self.weights, &errors, 0.0);

        let momentum = |current: f64, prev: f64, alpha: f64| {
            if alpha != 0.0 {
                alpha * (current - prev)
            } else {
                0.0
            }
        };

        let mut new_weights = self.weights.clone();
        for t in 0..self.output_dim() {
            for j in 0..self.nodes() {
                let dw = self.eta * errors[t] * cache.activations[j]
                    + momentum(self.weights[(t, j)], self.weights_prev[(t, j)], self.alpha);
                new_weights[(t, j)] += dw;
            }
        }

        let mut radius_clamped = false;
        let mut new_centers = self.centers.clone();
        let mut new_radii = self.radii.clone();
        for j in 0..self.nodes() {
            let diff = &cache.regressor - &self.centers[j];
            let b = self.radii[j];
            let grad_scale = self.eta * node_err[j] * cache.activations[j];
            // Center moves along (x - c_j)/b^2; radius along ||x - c_j||^2/b^3.
            for i in 0..self.input_dim() {
                let dc = grad_scale * diff[i] / (b * b)
                    + momentum(self.centers[j][i], self.centers_prev[j][i], self.alpha);
                new_centers[j][i] += dc;
            }
            let db = grad_scale * diff.norm_squared() / (b * b * b)
                + momentum(b, self.radii_prev[j], self.alpha);
            let candidate = b + db;
            if candidate < RADIUS_FLOOR {
                radius_clamped = true;
                new_radii[j] = RADIUS_FLOOR;
            } else {
                new_radii[j] = candidate;
            }
        }

        self.weights_prev = std::mem::replace(&mut self.weights, new_weights);
        self.centers_prev = std::mem::replace(&mut self.centers, new_centers);
        self.radii_prev = std::mem::replace(&mut self.radii, new_radii);
        self.generation += 1;

        Ok(RbfStepReport {
            errors,
            radius_clamped,
        })
    }
}
