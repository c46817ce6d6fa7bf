//! Randomized gradient checks: chain-rule rows against central finite
//! differences of the forward pass.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MlpEstimator, RbfEstimator};
use crate::error::{Error, Result};

/// Worst admissible relative row error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub trials: usize,
    pub worst_rel_error: f64,
    pub passed: bool,
}

fn rel_row_error(chain: &DVector<f64>, fd: &DVector<f64>) -> f64 {
    (chain - fd).norm() / fd.norm().max(1e-8)
}

/// Checks `trials` random feedforward networks with one to three hidden
/// layers.
pub fn mlp_gradient_check(trials: usize, seed: u64) -> Result<GradCheckReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let input = rng.gen_range(1..=3) * rng.gen_range(1..=3);
        let outputs = rng.gen_range(1..=3);
        let hidden_layers = rng.gen_range(1..=3);
        let mut dims = vec![input];
        for _ in 0..hidden_layers {
            dims.push(rng.gen_range(2..=8));
        }
        dims.push(outputs);
        let net = MlpEstimator::seeded(&dims, 0.5, 0.0, &mut rng)?;
        let x = DVector::from_fn(input, |_, _| rng.gen_range(-1.0..1.0));
        let (_, cache) = net.forward(&x)?;
        for t in 0..outputs {
            let chain = net.pjm_row(&cache, t)?;
            let fd = DVector::from_fn(input, |i, _| {
                let mut xp = x.clone();
                xp[i] += FD_STEP;
                let mut xm = x.clone();
                xm[i] -= FD_STEP;
                let yp = net.forward(&xp).unwrap().0[t];
                let ym = net.forward(&xm).unwrap().0[t];
                (yp - ym) / (2.0 * FD_STEP)
            });
            worst = worst.max(rel_row_error(&chain, &fd));
        }
    }
    Ok(GradCheckReport {
        trials,
        worst_rel_error: worst,
        passed: worst < GRADCHECK_TOLERANCE,
    })
}

/// Checks `trials` random radial-basis networks.
pub fn rbf_gradient_check(trials: usize, seed: u64) -> Result<GradCheckReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let input = rng.gen_range(1..=3) * rng.gen_range(1..=3);
        let outputs = rng.gen_range(1..=3);
        let nodes = rng.gen_range(2..=8);
        let centers = (0..nodes)
            .map(|_| DVector::from_fn(input, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let radii = DVector::from_fn(nodes, |_, _| rng.gen_range(0.3..2.0));
        let weights = nalgebra::DMatrix::from_fn(outputs, nodes, |_, _| rng.gen_range(-1.0..1.0));
        let net = RbfEstimator::new(centers, radii, weights, 0.5, 0.0)?;
        let x = DVector::from_fn(input, |_, _| rng.gen_range(-1.0..1.0));
        let (_, cache) = net.forward(&x)?;
        for t in 0..outputs {
            let chain = net.pjm_row(&cache, t)?;
            let fd = DVector::from_fn(input, |i, _| {
                let mut xp = x.clone();
                xp[i] += FD_STEP;
                let mut xm = x.clone();
                xm[i] -= FD_STEP;
                let yp = net.forward(&xp).unwrap().0[t];
                let ym = net.forward(&xm).unwrap().0[t];
                (yp - ym) / (2.0 * FD_STEP)
            });
            worst = worst.max(rel_row_error(&chain, &fd));
        }
    }
    Ok(GradCheckReport {
        trials,
        worst_rel_error: worst,
        passed: worst < GRADCHECK_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_families_pass_at_modest_trial_counts() {
        let mlp = mlp_gradient_check(20, 11).unwrap();
        assert!(mlp.passed, "worst {}", mlp.worst_rel_error);
        let rbf = rbf_gradient_check(20, 11).unwrap();
        assert!(rbf.passed, "worst {}", rbf.worst_rel_error);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(mlp_gradient_check(0, 1).is_err());
        assert!(rbf_gradient_check(0, 1).is_err());
    }
}
