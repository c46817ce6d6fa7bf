//! Multi-step output prediction built on the incremental model.
//!
//! For a prediction horizon `N` and a control horizon `N_u <= N` the stacked
//! predictions are affine in the free future moves and the stored increment
//! history,
//!
//! ```text
//!   Y(k+1) = E*y(k) + Psi_nu * dU_future + Psi_bar * dU(k-1)
//! ```
//!
//! `Psi_nu` is block lower-triangular with cumulative block-gain sums;
//! `Psi_bar` collects the influence of increments already applied. Both a
//! frozen-gain variant and a time-varying variant (one gain matrix per
//! predicted step) are provided; the latter degenerates to the former for a
//! constant gain sequence.

use nalgebra::{DMatrix, DVector};

use crate::edlm::{IncrementStack, PseudoJacobianMatrix};
use crate::error::{Error, Result};

/// Stacked prediction operators for one (N, N_u, gain) configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOperators {
    e_stack: DMatrix<f64>,
    psi_bar: DMatrix<f64>,
    psi_nu: DMatrix<f64>,
    n: usize,
    n_u: usize,
    pseudo_order: usize,
    m_y: usize,
    m_u: usize,
}

impl PredictionOperators {
    /// `N` identity blocks stacked, `(N*M_y) x M_y`.
    pub fn e_stack(&self) -> &DMatrix<f64> {
        &self.e_stack
    }

    /// Influence of the stored increment history, `(N*M_y) x (L*M_u)`.
    pub fn psi_bar(&self) -> &DMatrix<f64> {
        &self.psi_bar
    }

    /// Influence of the free future moves, `(N*M_y) x (N_u*M_u)`.
    pub fn psi_nu(&self) -> &DMatrix<f64> {
        &self.psi_nu
    }

    pub fn prediction_horizon(&self) -> usize {
        self.n
    }

    pub fn control_horizon(&self) -> usize {
        self.n_u
    }

    pub fn pseudo_order(&self) -> usize {
        self.pseudo_order
    }

    pub fn output_dim(&self) -> usize {
        self.m_y
    }

    pub fn input_dim(&self) -> usize {
        self.m_u
    }
}

fn check_horizons(n: usize, n_u: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidHorizon(
            "prediction horizon must be at least 1".into(),
        ));
    }
    if n_u < 1 || n_u > n {
        return Err(Error::InvalidHorizon(format!(
            "control horizon must satisfy 1 <= n_u <= n, got n_u = {n_u}, n = {n}"
        )));
    }
    Ok(())
}

/// Sum of gain blocks `lo..=hi` (one-based, clipped to the pseudo order) of
/// `pjm_at(t)`; empty ranges contribute nothing.
fn accumulate_blocks<'a>(
    target: &mut DMatrix<f64>,
    row: usize,
    col: usize,
    terms: impl Iterator<Item = (&'a PseudoJacobianMatrix, usize)>,
) {
    for (pjm, block_index) in terms {
        let (m_y, m_u) = (pjm.output_dim(), pjm.input_dim());
        let mut view = target.view_mut((row * m_y, col * m_u), (m_y, m_u));
        view += pjm.block(block_index);
    }
}

fn build_operators(
    gains: &[&PseudoJacobianMatrix],
    n: usize,
    n_u: usize,
) -> Result<PredictionOperators> {
    check_horizons(n, n_u)?;
    debug_assert_eq!(gains.len(), n);
    let first = gains[0];
    let (m_y, m_u, l) = (first.output_dim(), first.input_dim(), first.pseudo_order());
    if gains
        .iter()
        .any(|g| g.output_dim() != m_y || g.input_dim() != m_u || g.pseudo_order() != l)
    {
        return Err(Error::InvalidInput(
            "gain sequence must share one block shape and pseudo order".into(),
        ));
    }

    let mut e_stack = DMatrix::zeros(n * m_y, m_y);
    for r in 0..n {
        e_stack
            .view_mut((r * m_y, 0), (m_y, m_y))
            .copy_from(&DMatrix::identity(m_y, m_y));
    }

    // Row r (zero-based) of Psi_bar sums the shifted gains of steps
    // k..k+r: block column c receives gain block c+1+i of step k+i.
    let mut psi_bar = DMatrix::zeros(n * m_y, l * m_u);
    for r in 0..n {
        for c in 0..l {
            let terms = (0..=r)
                .filter(|&i| c + 1 + i < l)
                .map(|i| (gains[i], c + 1 + i));
            accumulate_blocks(&mut psi_bar, r, c, terms);
        }
    }

    // Block (r, c) of Psi_nu (r >= c) sums gain block i-c+1 of step k+i
    // for i = c..r, clipped to the pseudo order.
    let mut psi_nu = DMatrix::zeros(n * m_y, n_u * m_u);
    for r in 0..n {
        for c in 0..n_u.min(r + 1) {
            let terms = (c..=r).filter(|&i| i - c < l).map(|i| (gains[i], i - c));
            accumulate_blocks(&mut psi_nu, r, c, terms);
        }
    }

    Ok(PredictionOperators {
        e_stack,
        psi_bar,
        psi_nu,
        n,
        n_u,
        pseudo_order: l,
        m_y,
        m_u,
    })
}

/// Builds the prediction operators with the gain matrix frozen over the
/// horizon.
pub fn build_prediction_operators(
    pjm: &PseudoJacobianMatrix,
    n: usize,
    n_u: usize,
) -> Result<PredictionOperators> {
    check_horizons(n, n_u)?;
    let gains: Vec<&PseudoJacobianMatrix> = std::iter::repeat_n(pjm, n).collect();
    build_operators(&gains, n, n_u)
}

/// Builds the prediction operators from one gain matrix per predicted step
/// (`gains[i]` applies at step `k+i`). A constant sequence reproduces
/// [`build_prediction_operators`] exactly.
pub fn build_prediction_operators_tv(
    gains: &[PseudoJacobianMatrix],
    n: usize,
    n_u: usize,
) -> Result<PredictionOperators> {
    check_horizons(n, n_u)?;
    if gains.len() != n {
        return Err(Error::InvalidInput(format!(
            "gain sequence has {} entries, expected n = {n}",
            gains.len()
        )));
    }
    let refs: Vec<&PseudoJacobianMatrix> = gains.iter().collect();
    build_operators(&refs, n, n_u)
}

/// Evaluates the stacked predictions for the given output, increment
/// history and free future moves.
pub fn predict_horizon(
    ops: &PredictionOperators,
    y_k: &DVector<f64>,
    du_prev: &IncrementStack,
    du_future: &DVector<f64>,
) -> Result<DVector<f64>> {
    if y_k.len() != ops.m_y {
        return Err(Error::InvalidDimension(format!(
            "output has length {}, expected {}",
            y_k.len(),
            ops.m_y
        )));
    }
    if du_prev.pseudo_order() != ops.pseudo_order || du_prev.input_dim() != ops.m_u {
        return Err(Error::InvalidDimension(format!(
            "increment history is {} blocks of length {}, expected {} of {}",
            du_prev.pseudo_order(),
            du_prev.input_dim(),
            ops.pseudo_order,
            ops.m_u
        )));
    }
    if du_future.len() != ops.n_u * ops.m_u {
        return Err(Error::InvalidDimension(format!(
            "future moves have length {}, expected {}",
            du_future.len(),
            ops.n_u * ops.m_u
        )));
    }
    let mut y = &ops.e_stack * y_k;
    y.gemv(1.0, &ops.psi_nu, du_future, 1.0);
    y.gemv(1.0, &ops.psi_bar, du_prev.as_vector(), 1.0);
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn demo_pjm() -> PseudoJacobianMatrix {
        PseudoJacobianMatrix::new(vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.8, 1.2]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.4, 0.7]),
        ])
        .unwrap()
    }

    fn random_pjm(rng: &mut ChaCha8Rng, l: usize, m_y: usize, m_u: usize) -> PseudoJacobianMatrix {
        let blocks = (0..l)
            .map(|_| DMatrix::from_fn(m_y, m_u, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        PseudoJacobianMatrix::new(blocks).unwrap()
    }

    #[test]
    fn two_step_operators_match_symbolic_expansion() {
        let pjm = demo_pjm();
        let ops = build_prediction_operators(&pjm, 2, 2).unwrap();

        let phi1 = pjm.block(0);
        let phi2 = pjm.block(1);
        let mut psi_nu = DMatrix::zeros(4, 4);
        psi_nu.view_mut((0, 0), (2, 2)).copy_from(phi1);
        psi_nu.view_mut((2, 0), (2, 2)).copy_from(&(phi1 + phi2));
        psi_nu.view_mut((2, 2), (2, 2)).copy_from(phi1);
        assert_eq!(ops.psi_nu(), &psi_nu);

        let mut psi_bar = DMatrix::zeros(4, 4);
        psi_bar.view_mut((0, 0), (2, 2)).copy_from(phi2);
        psi_bar.view_mut((2, 0), (2, 2)).copy_from(phi2);
        assert_eq!(ops.psi_bar(), &psi_bar);
    }

    #[test]
    fn single_step_operators_specialize() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pjm = random_pjm(&mut rng, 4, 2, 3);
        let ops = build_prediction_operators(&pjm, 1, 1).unwrap();
        assert_eq!(ops.psi_nu(), pjm.block(0));
        // One row: blocks 2..L followed by a zero block.
        let mut expected = DMatrix::zeros(2, 12);
        for c in 0..3 {
            expected
                .view_mut((0, c * 3), (2, 3))
                .copy_from(pjm.block(c + 1));
        }
        assert_eq!(ops.psi_bar(), &expected);
    }

    #[test]
    fn order_one_history_operator_vanishes() {
        let pjm = PseudoJacobianMatrix::new(vec![DMatrix::identity(2, 2)]).unwrap();
        let ops = build_prediction_operators(&pjm, 3, 2).unwrap();
        assert_eq!(ops.psi_bar(), &DMatrix::zeros(6, 2));
    }

    #[test]
    fn horizon_validation() {
        let pjm = demo_pjm();
        assert!(matches!(
            build_prediction_operators(&pjm, 2, 3),
            Err(Error::InvalidHorizon(_))
        ));
        assert!(matches!(
            build_prediction_operators(&pjm, 0, 0),
            Err(Error::InvalidHorizon(_))
        ));
    }

    #[test]
    fn constant_gain_sequence_collapses_to_frozen() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (l, n, n_u) in [(1, 3, 2), (2, 2, 2), (3, 4, 2), (2, 5, 5)] {
            let pjm = random_pjm(&mut rng, l, 2, 2);
            let frozen = build_prediction_operators(&pjm, n, n_u).unwrap();
            let tv = build_prediction_operators_tv(&vec![pjm.clone(); n], n, n_u).unwrap();
            assert_eq!(frozen, tv);
        }
    }

    #[test]
    fn time_varying_diagonal_uses_later_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g0 = random_pjm(&mut rng, 2, 2, 2);
        let g1 = random_pjm(&mut rng, 2, 2, 2);
        let ops = build_prediction_operators_tv(&[g0.clone(), g1.clone()], 2, 2).unwrap();
        // Diagonal block (2, 2) carries the step-(k+1) gain.
        assert_eq!(
            DMatrix::from(ops.psi_nu().view((2, 2), (2, 2))),
            g1.block(0).clone()
        );
        // History operator row 2: only the step-k second block survives.
        let mut row2 = DMatrix::zeros(2, 4);
        row2.view_mut((0, 0), (2, 2)).copy_from(g0.block(1));
        assert_eq!(DMatrix::from(ops.psi_bar().view((2, 0), (2, 4))), row2);
    }

    #[test]
    fn time_varying_sequence_length_checked() {
        let pjm = demo_pjm();
        assert!(matches!(
            build_prediction_operators_tv(&[pjm], 2, 2),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn zero_increments_predict_held_output() {
        let pjm = demo_pjm();
        let ops = build_prediction_operators(&pjm, 3, 2).unwrap();
        let y_k = DVector::from_vec(vec![0.7, -0.3]);
        let y = predict_horizon(
            &ops,
            &y_k,
            &IncrementStack::zeros(2, 2).unwrap(),
            &DVector::zeros(4),
        )
        .unwrap();
        for r in 0..3 {
            assert_eq!(DVector::from(y.rows(2 * r, 2)), y_k);
        }
    }

    #[test]
    fn one_step_prediction_matches_incremental_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pjm = random_pjm(&mut rng, 3, 2, 2);
        let ops = build_prediction_operators(&pjm, 1, 1).unwrap();
        let y_k = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let du_prev =
            IncrementStack::new(DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0)), 2).unwrap();
        let du_new = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));

        let predicted = predict_horizon(&ops, &y_k, &du_prev, &du_new).unwrap();
        // Oracle: y(k) + B1*du(k) + B2*du(k-1) + B3*du(k-2).
        let expected = &y_k
            + pjm.block(0) * &du_new
            + pjm.block(1) * DVector::from(du_prev.block(0))
            + pjm.block(2) * DVector::from(du_prev.block(1));
        assert_abs_diff_eq!(predicted, expected, epsilon = 1e-14);
    }

    /// Brute-force rollout of a linear incremental plant.
    fn rollout(
        pjm: &PseudoJacobianMatrix,
        y_k: &DVector<f64>,
        du_prev: &IncrementStack,
        moves: &[DVector<f64>],
        n: usize,
    ) -> DVector<f64> {
        let m_y = pjm.output_dim();
        let mut y = y_k.clone();
        let mut stack = du_prev.clone();
        let mut out = DVector::zeros(n * m_y);
        let hold = DVector::zeros(pjm.input_dim());
        for step in 0..n {
            let du = moves.get(step).unwrap_or(&hold);
            stack = stack.shifted(du).unwrap();
            y += crate::edlm::edlm_step(pjm, &stack).unwrap();
            out.rows_mut(step * m_y, m_y).copy_from(&y);
        }
        out
    }

    #[test]
    fn predictions_equal_two_step_plant_rollout() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pjm = demo_pjm();
        let ops = build_prediction_operators(&pjm, 2, 2).unwrap();
        for _ in 0..20 {
            let y_k = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let du_prev =
                IncrementStack::new(DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0)), 2)
                    .unwrap();
            let moves: Vec<DVector<f64>> = (0..2)
                .map(|_| DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0)))
                .collect();
            let du_future = DVector::from_vec(
                moves
                    .iter()
                    .flat_map(|m| m.iter().copied())
                    .collect::<Vec<_>>(),
            );
            let predicted = predict_horizon(&ops, &y_k, &du_prev, &du_future).unwrap();
            let expected = rollout(&pjm, &y_k, &du_prev, &moves, 2);
            assert_abs_diff_eq!(predicted, expected, epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_on_linear_plants_for_all_horizons() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for (l, n, n_u, m_y, m_u) in [(1, 4, 2, 1, 1), (2, 3, 1, 2, 3), (3, 5, 4, 2, 2)] {
            let pjm = random_pjm(&mut rng, l, m_y, m_u);
            let ops = build_prediction_operators(&pjm, n, n_u).unwrap();
            let y_k = DVector::from_fn(m_y, |_, _| rng.gen_range(-1.0..1.0));
            let du_prev = IncrementStack::new(
                DVector::from_fn(l * m_u, |_, _| rng.gen_range(-1.0..1.0)),
                m_u,
            )
            .unwrap();
            let moves: Vec<DVector<f64>> = (0..n_u)
                .map(|_| DVector::from_fn(m_u, |_, _| rng.gen_range(-1.0..1.0)))
                .collect();
            let du_future = DVector::from_vec(
                moves
                    .iter()
                    .flat_map(|m| m.iter().copied())
                    .collect::<Vec<_>>(),
            );
            let predicted = predict_horizon(&ops, &y_k, &du_prev, &du_future).unwrap();
            let expected = rollout(&pjm, &y_k, &du_prev, &moves, n);
            assert_abs_diff_eq!(predicted, expected, epsilon = 1e-12);

            // Truncation consistency: leading block equals the one-step
            // prediction built with the same first move.
            let one = build_prediction_operators(&pjm, 1, 1).unwrap();
            let first = predict_horizon(&one, &y_k, &du_prev, &moves[0]).unwrap();
            assert_abs_diff_eq!(
                DVector::from(predicted.rows(0, m_y)),
                first,
                epsilon = 1e-13
            );
        }
    }
}
