//! Receding-horizon control law over the horizon predictor.
//!
//! Each step solves the regularized least-squares problem
//!
//! ```text
//!   dU = [Psi_nu' Psi_nu + diag(lambda)]^-1 Psi_nu' (Y* - E y(k) - Psi_bar dU(k-1))
//! ```
//!
//! and applies only the first input move. The move weights `lambda` may be
//! negative, so the normal matrix can be indefinite: a symmetric
//! factorization is tried first and a general one is used when it fails.
//! Variants add proportional/integral shaping of the error bracket and an
//! iterative re-linearization for strongly nonlinear plants.

use nalgebra::{DMatrix, DVector};

use crate::edlm::{IncrementStack, PseudoJacobianMatrix};
use crate::error::{Error, Result};
use crate::predictor::{
    build_prediction_operators, build_prediction_operators_tv, predict_horizon, PredictionOperators,
};

/// Move-weight choice for the cost function.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaWeights {
    /// One scalar repeated over all `N_u * M_u` moves.
    Uniform(f64),
    /// One entry per move; length must equal `N_u * M_u`.
    PerEntry(Vec<f64>),
}

impl LambdaWeights {
    /// Expands to the diagonal of the weight matrix.
    pub fn diagonal(&self, len: usize) -> Result<DVector<f64>> {
        match self {
            LambdaWeights::Uniform(v) => Ok(DVector::from_element(len, *v)),
            LambdaWeights::PerEntry(entries) => {
                if entries.len() != len {
                    return Err(Error::InvalidDimension(format!(
                        "lambda has {} entries, expected {len}",
                        entries.len()
                    )));
                }
                Ok(DVector::from_vec(entries.clone()))
            }
        }
    }

    /// The scalar value when the weights are uniform.
    pub fn uniform_value(&self) -> Option<f64> {
        match self {
            LambdaWeights::Uniform(v) => Some(*v),
            LambdaWeights::PerEntry(_) => None,
        }
    }
}

/// Static controller configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub prediction_horizon: usize,
    pub control_horizon: usize,
    pub pseudo_order: usize,
    pub lambda: LambdaWeights,
    /// Fall back to the minimum-norm least-squares solution when the
    /// normal matrix cannot be factorized.
    pub pseudo_inverse_fallback: bool,
    /// Replace the move penalty by a penalty on the change of the solved
    /// move sequence, adding one more integrator to the loop.
    pub double_integrator_mode: bool,
}

impl ControllerConfig {
    pub fn new(n: usize, n_u: usize, pseudo_order: usize, lambda: LambdaWeights) -> Self {
        Self {
            prediction_horizon: n,
            control_horizon: n_u,
            pseudo_order,
            lambda,
            pseudo_inverse_fallback: false,
            double_integrator_mode: false,
        }
    }
}

/// Mutable per-loop controller memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// Input applied at the previous step.
    pub u_prev: DVector<f64>,
    /// Increment stack at `k-1`.
    pub du_history: IncrementStack,
    /// Solved move sequence of the previous step (double-integrator mode).
    pub du_nu_prev: Option<DVector<f64>>,
    /// Stacked reference error of the previous step (PID variant).
    pub ref_error_prev: Option<DVector<f64>>,
}

impl ControllerState {
    /// Zero-history state for the given dimensions.
    pub fn new(input_dim: usize, pseudo_order: usize) -> Result<Self> {
        Ok(Self {
            u_prev: DVector::zeros(input_dim),
            du_history: IncrementStack::zeros(pseudo_order, input_dim)?,
            du_nu_prev: None,
            ref_error_prev: None,
        })
    }

    pub fn with_history(u_prev: DVector<f64>, du_history: IncrementStack) -> Result<Self> {
        if du_history.input_dim() != u_prev.len() {
            return Err(Error::InvalidDimension(
                "input and increment history dimensions differ".into(),
            ));
        }
        Ok(Self {
            u_prev,
            du_history,
            du_nu_prev: None,
            ref_error_prev: None,
        })
    }

    /// Absolute inputs `u(k-1), u(k-2), ..., u(k-L-1)` reconstructed from
    /// the stored increments, newest first.
    pub fn input_window(&self) -> Vec<DVector<f64>> {
        let l = self.du_history.pseudo_order();
        let mut window = Vec::with_capacity(l + 1);
        let mut u = self.u_prev.clone();
        window.push(u.clone());
        for i in 0..l {
            u -= DVector::from(self.du_history.block(i));
            window.push(u.clone());
        }
        window
    }
}

/// Result of one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutcome {
    /// Input to apply at the current step.
    pub u: DVector<f64>,
    /// Full solved move sequence over the control horizon.
    pub du_nu: DVector<f64>,
}

/// Proportional/integral gains shaping the reference-error bracket. Each
/// gain is `M_y x M_y` and is replicated over the horizon blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PidGains {
    pub k_p: DMatrix<f64>,
    pub k_i: DMatrix<f64>,
}

fn check_control_inputs(
    state: &ControllerState,
    pjm: &PseudoJacobianMatrix,
    y_k: &DVector<f64>,
    refs: &DVector<f64>,
    cfg: &ControllerConfig,
) -> Result<()> {
    if pjm.pseudo_order() != cfg.pseudo_order {
        return Err(Error::InvalidDimension(format!(
            "gain matrix has pseudo order {}, config says {}",
            pjm.pseudo_order(),
            cfg.pseudo_order
        )));
    }
    if y_k.len() != pjm.output_dim() {
        return Err(Error::InvalidDimension(format!(
            "output has length {}, expected {}",
            y_k.len(),
            pjm.output_dim()
        )));
    }
    if refs.len() != cfg.prediction_horizon * pjm.output_dim() {
        return Err(Error::InvalidDimension(format!(
            "reference stack has length {}, expected {}",
            refs.len(),
            cfg.prediction_horizon * pjm.output_dim()
        )));
    }
    if state.u_prev.len() != pjm.input_dim() || state.du_history.pseudo_order() != cfg.pseudo_order
    {
        return Err(Error::InvalidDimension(
            "controller state does not match the configured dimensions".into(),
        ));
    }
    Ok(())
}

/// Solves `(Psi' Psi + diag(lambda)) x = rhs`, preferring the symmetric
/// factorization, then a general one, then (optionally) the minimum-norm
/// least-squares solution.
fn solve_normal(
    normal: DMatrix<f64>,
    rhs: DVector<f64>,
    fallback: bool,
    iteration: Option<usize>,
) -> Result<DVector<f64>> {
    if let Some(chol) = normal.clone().cholesky() {
        return Ok(chol.solve(&rhs));
    }
    if let Some(x) = normal.clone().lu().solve(&rhs) {
        // LU can "solve" an ill-conditioned system with garbage; accept the
        // solution only when it reproduces the right-hand side.
        let scale = normal.amax().max(1.0);
        if (&normal * &x - &rhs).amax() <= 1e-8 * scale * rhs.amax().max(1.0) {
            return Ok(x);
        }
    }
    if fallback {
        let svd = normal.svd(true, true);
        return svd
            .solve(&rhs, 1e-12)
            .map_err(|_| Error::SingularSystem { iteration });
    }
    Err(Error::SingularSystem { iteration })
}

fn solve_moves(
    ops: &PredictionOperators,
    bracket: &DVector<f64>,
    state: &ControllerState,
    cfg: &ControllerConfig,
    iteration: Option<usize>,
) -> Result<DVector<f64>> {
    let psi_nu = ops.psi_nu();
    let lambda = cfg
        .lambda
        .diagonal(ops.control_horizon() * ops.input_dim())?;

    // b = Y* - E y(k) - Psi_bar dU(k-1), shaped by the caller.
    let mut free = bracket.clone();
    free.gemv(-1.0, ops.psi_bar(), state.du_history.as_vector(), 1.0);

    let mut normal = psi_nu.transpose() * psi_nu;
    for i in 0..lambda.len() {
        normal[(i, i)] += lambda[i];
    }
    let mut rhs = psi_nu.transpose() * free;
    if cfg.double_integrator_mode {
        if let Some(prev) = &state.du_nu_prev {
            for i in 0..rhs.len() {
                rhs[i] += lambda[i] * prev[i];
            }
        }
    }
    solve_normal(normal, rhs, cfg.pseudo_inverse_fallback, iteration)
}

fn advance_state(
    state: &ControllerState,
    du_nu: &DVector<f64>,
    error_stack: DVector<f64>,
    m_u: usize,
) -> Result<(ControlOutcome, ControllerState)> {
    let du_now = DVector::from(du_nu.rows(0, m_u));
    let u = &state.u_prev + &du_now;
    let next = ControllerState {
        u_prev: u.clone(),
        du_history: state.du_history.shifted(&du_now)?,
        du_nu_prev: Some(du_nu.clone()),
        ref_error_prev: Some(error_stack),
    };
    Ok((
        ControlOutcome {
            u,
            du_nu: du_nu.clone(),
        },
        next,
    ))
}

/// One step of the receding-horizon law. Returns the applied input, the
/// solved move sequence and the advanced state.
pub fn mfapc_control(
    state: &ControllerState,
    pjm: &PseudoJacobianMatrix,
    y_k: &DVector<f64>,
    refs: &DVector<f64>,
    cfg: &ControllerConfig,
) -> Result<(ControlOutcome, ControllerState)> {
    check_control_inputs(state, pjm, y_k, refs, cfg)?;
    let ops = build_prediction_operators(pjm, cfg.prediction_horizon, cfg.control_horizon)?;
    let error_stack = refs - ops.e_stack() * y_k;
    let du_nu = solve_moves(&ops, &error_stack, state, cfg, None)?;
    advance_state(state, &du_nu, error_stack, pjm.input_dim())
}

/// Variant with proportional/integral shaping of the reference-error
/// bracket. With `k_i = I` and `k_p = 0` it reduces to [`mfapc_control`]
/// exactly; the proportional term differences the current stacked error
/// against the previous step's (zero on the first step).
pub fn mfapc_control_pid(
    state: &ControllerState,
    pjm: &PseudoJacobianMatrix,
    y_k: &DVector<f64>,
    refs: &DVector<f64>,
    cfg: &ControllerConfig,
    gains: &PidGains,
) -> Result<(ControlOutcome, ControllerState)> {
    check_control_inputs(state, pjm, y_k, refs, cfg)?;
    let m_y = pjm.output_dim();
    if gains.k_p.shape() != (m_y, m_y) || gains.k_i.shape() != (m_y, m_y) {
        return Err(Error::InvalidDimension(format!(
            "gains must be {m_y}x{m_y} matrices"
        )));
    }
    let ops = build_prediction_operators(pjm, cfg.prediction_horizon, cfg.control_horizon)?;
    let error_stack = refs - ops.e_stack() * y_k;
    let error_diff = match &state.ref_error_prev {
        Some(prev) if prev.len() == error_stack.len() => &error_stack - prev,
        _ => DVector::zeros(error_stack.len()),
    };

    // Apply the gains block-diagonally over the horizon.
    let mut bracket = DVector::zeros(error_stack.len());
    for r in 0..cfg.prediction_horizon {
        let e_blk = error_stack.rows(r * m_y, m_y);
        let d_blk = error_diff.rows(r * m_y, m_y);
        let shaped = &gains.k_i * e_blk + &gains.k_p * d_blk;
        bracket.rows_mut(r * m_y, m_y).copy_from(&shaped);
    }
    let du_nu = solve_moves(&ops, &bracket, state, cfg, None)?;
    advance_state(state, &du_nu, error_stack, pjm.input_dim())
}

/// Iterative re-linearization: each pass evaluates the gain matrix along
/// the candidate input trajectory, rebuilds the time-varying operators and
/// re-solves; the first move of the final pass is applied.
///
/// `gain_at` receives the absolute input window (newest first, `L + 1`
/// entries) at each predicted step. One iteration with a window-independent
/// evaluator reproduces [`mfapc_control`].
pub fn mfapc_control_iterative<F>(
    state: &ControllerState,
    mut gain_at: F,
    y_k: &DVector<f64>,
    refs: &DVector<f64>,
    cfg: &ControllerConfig,
    iterations: usize,
) -> Result<(ControlOutcome, ControllerState)>
where
    F: FnMut(&[DVector<f64>]) -> Result<PseudoJacobianMatrix>,
{
    if iterations == 0 {
        return Err(Error::InvalidParameter(
            "iterations must be positive".into(),
        ));
    }
    let n = cfg.prediction_horizon;
    let n_u = cfg.control_horizon;
    let m_u = state.u_prev.len();
    let l = cfg.pseudo_order;
    let history = state.input_window();

    let mut du_nu = DVector::zeros(n_u * m_u);
    let mut last_error_stack = DVector::zeros(refs.len());
    for iter in 1..=iterations {
        // Candidate absolute inputs u(k..k+N-1); moves stop after N_u.
        let mut candidates: Vec<DVector<f64>> = Vec::with_capacity(n);
        let mut u = state.u_prev.clone();
        for j in 0..n {
            if j < n_u {
                u += DVector::from(du_nu.rows(j * m_u, m_u));
            }
            candidates.push(u.clone());
        }
        // Window at step k+j: [u(k+j), ..., u(k+j-L)] drawing on the
        // candidates first and the stored history beyond them.
        let window_at = |j: usize| -> Vec<DVector<f64>> {
            (0..=l)
                .map(|back| {
                    if back <= j {
                        candidates[j - back].clone()
                    } else {
                        history[back - j - 1].clone()
                    }
                })
                .collect()
        };
        let mut gains = Vec::with_capacity(n);
        for j in 0..n {
            let g = gain_at(&window_at(j))?;
            check_control_inputs(state, &g, y_k, refs, cfg)?;
            gains.push(g);
        }
        let ops = build_prediction_operators_tv(&gains, n, n_u)?;
        last_error_stack = refs - ops.e_stack() * y_k;
        du_nu = solve_moves(&ops, &last_error_stack, state, cfg, Some(iter))?;
    }
    advance_state(state, &du_nu, last_error_stack, m_u)
}

/// Quadratic cost of a candidate move sequence; used to check stationarity
/// of the solved moves.
pub fn control_cost(
    pjm: &PseudoJacobianMatrix,
    state: &ControllerState,
    y_k: &DVector<f64>,
    refs: &DVector<f64>,
    cfg: &ControllerConfig,
    du_nu: &DVector<f64>,
) -> Result<f64> {
    let ops = build_prediction_operators(pjm, cfg.prediction_horizon, cfg.control_horizon)?;
    let predicted = predict_horizon(&ops, y_k, &state.du_history, du_nu)?;
    let err = refs - predicted;
    let lambda = cfg.lambda.diagonal(du_nu.len())?;
    let penalty: f64 = (0..du_nu.len())
        .map(|i| lambda[i] * du_nu[i] * du_nu[i])
        .sum();
    Ok(err.norm_squared() + penalty)
}
