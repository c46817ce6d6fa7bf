//! Incremental linear model of a MIMO plant around its current operating
//! point.
//!
//! The model relates the next output increment to a stack of recent input
//! increments through a block gain matrix,
//!
//! ```text
//!   dy(k+1) = [B_1 ... B_L] * [du(k); du(k-1); ...; du(k-L+1)]
//! ```
//!
//! where each block is `M_y x M_u` and `L` is the pseudo order. This module
//! owns the block matrix, the increment stack, the shift operators that
//! advance the stack in time, and a finite-difference routine that recovers
//! the blocks from any black-box plant map.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};

/// Default central-difference step; balances truncation against rounding
/// for signals of order one.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Block gain matrix `[B_1 ... B_L]` of the incremental model. Block `i`
/// multiplies the input increment lagged by `i - 1` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoJacobianMatrix {
    blocks: Vec<DMatrix<f64>>,
}

impl PseudoJacobianMatrix {
    /// Builds the matrix from its blocks. All blocks must share the same
    /// dimensions and at least one block is required.
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| {
            Error::InvalidDimension("pseudo-Jacobian needs at least one block".into())
        })?;
        let (rows, cols) = first.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension(
                "pseudo-Jacobian blocks must be non-empty".into(),
            ));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.shape() != (rows, cols) {
                return Err(Error::InvalidDimension(format!(
                    "block {} is {}x{}, expected {}x{}",
                    i + 1,
                    b.nrows(),
                    b.ncols(),
                    rows,
                    cols
                )));
            }
        }
        Ok(Self { blocks })
    }

    /// Number of lagged input increments the model retains.
    pub fn pseudo_order(&self) -> usize {
        self.blocks.len()
    }

    pub fn output_dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.blocks[0].ncols()
    }

    /// Block for lag `i` (zero-based: `block(0)` multiplies `du(k)`).
    pub fn block(&self, i: usize) -> &DMatrix<f64> {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// The blocks laid side by side as one `M_y x (L*M_u)` matrix.
    pub fn as_wide_matrix(&self) -> DMatrix<f64> {
        let (m_y, m_u) = (self.output_dim(), self.input_dim());
        let mut wide = DMatrix::zeros(m_y, self.pseudo_order() * m_u);
        for (i, b) in self.blocks.iter().enumerate() {
            wide.view_mut((0, i * m_u), (m_y, m_u)).copy_from(b);
        }
        wide
    }

    /// Sum over the blocks of `block_i * x^(i-1)`, as a polynomial in the
    /// backward shift.
    pub fn to_polynomial(&self) -> MatrixPolynomial {
        MatrixPolynomial {
            coeffs: self.blocks.clone(),
        }
    }
}

/// Matrix polynomial in the backward shift operator; coefficient `i`
/// multiplies the shift raised to the power `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    coeffs: Vec<DMatrix<f64>>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        PseudoJacobianMatrix::new(coeffs).map(|p| MatrixPolynomial { coeffs: p.blocks })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, i: usize) -> &DMatrix<f64> {
        &self.coeffs[i]
    }

    /// Evaluates the polynomial at a real backward-shift value. At 1 this
    /// is the plain sum of the coefficient matrices.
    pub fn eval(&self, x: f64) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.coeffs[0].nrows(), self.coeffs[0].ncols());
        let mut pow = 1.0;
        for c in &self.coeffs {
            acc += c * pow;
            pow *= x;
        }
        acc
    }
}

/// Stack of input increments, newest block first:
/// `[du(k); du(k-1); ...; du(k-L+1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementStack {
    data: DVector<f64>,
    input_dim: usize,
}

impl IncrementStack {
    pub fn new(data: DVector<f64>, input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidDimension(
                "input dimension must be positive".into(),
            ));
        }
        if data.is_empty() || !data.len().is_multiple_of(input_dim) {
            return Err(Error::InvalidDimension(format!(
                "stack length {} is not a positive multiple of the input dimension {}",
                data.len(),
                input_dim
            )));
        }
        Ok(Self { data, input_dim })
    }

    pub fn zeros(pseudo_order: usize, input_dim: usize) -> Result<Self> {
        if pseudo_order == 0 {
            return Err(Error::InvalidDimension(
                "pseudo order must be positive".into(),
            ));
        }
        Self::new(DVector::zeros(pseudo_order * input_dim), input_dim)
    }

    /// Builds the stack from per-lag increment vectors, newest first.
    pub fn from_blocks(blocks: &[DVector<f64>]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidDimension("empty increment stack".into()))?;
        let m_u = first.len();
        let mut data = DVector::zeros(blocks.len() * m_u);
        for (i, b) in blocks.iter().enumerate() {
            if b.len() != m_u {
                return Err(Error::InvalidDimension(format!(
                    "increment block {i} has length {}, expected {m_u}",
                    b.len()
                )));
            }
            data.rows_mut(i * m_u, m_u).copy_from(b);
        }
        Self::new(data, m_u)
    }

    pub fn pseudo_order(&self) -> usize {
        self.data.len() / self.input_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn block(&self, i: usize) -> DVectorView<'_, f64> {
        self.data.rows(i * self.input_dim, self.input_dim)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    /// Advances the stack one step: drops the oldest block and pushes the
    /// new increment on top. Equals `A * self + B * du` for the shift
    /// operators of [`make_shift_operators`].
    pub fn shifted(&self, du: &DVector<f64>) -> Result<Self> {
        if du.len() != self.input_dim {
            return Err(Error::InvalidDimension(format!(
                "increment has length {}, expected {}",
                du.len(),
                self.input_dim
            )));
        }
        let m = self.input_dim;
        let l = self.pseudo_order();
        let mut data = DVector::zeros(l * m);
        data.rows_mut(0, m).copy_from(du);
        if l > 1 {
            data.rows_mut(m, (l - 1) * m)
                .copy_from(&self.data.rows(0, (l - 1) * m));
        }
        Ok(Self { data, input_dim: m })
    }
}

/// Shift operators advancing an increment stack in time:
/// `stack(k) = A * stack(k-1) + B * du(k)`.
///
/// `A` carries identity blocks on its first block subdiagonal (and is
/// nilpotent of index `L`); `B` stacks one identity block on top of zeros.
pub fn make_shift_operators(
    pseudo_order: usize,
    input_dim: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if pseudo_order == 0 || input_dim == 0 {
        return Err(Error::InvalidDimension(
            "pseudo order and input dimension must be positive".into(),
        ));
    }
    let n = pseudo_order * input_dim;
    let mut a = DMatrix::zeros(n, n);
    for blk in 1..pseudo_order {
        for j in 0..input_dim {
            a[(blk * input_dim + j, (blk - 1) * input_dim + j)] = 1.0;
        }
    }
    let mut b = DMatrix::zeros(n, input_dim);
    for j in 0..input_dim {
        b[(j, j)] = 1.0;
    }
    Ok((a, b))
}

/// One step of the incremental model: `dy(k+1) = sum_i B_i * du(k-i+1)`.
pub fn edlm_step(pjm: &PseudoJacobianMatrix, du_stack: &IncrementStack) -> Result<DVector<f64>> {
    if du_stack.input_dim() != pjm.input_dim() || du_stack.pseudo_order() != pjm.pseudo_order() {
        return Err(Error::InvalidDimension(format!(
            "increment stack is {} blocks of length {}, model expects {} blocks of length {}",
            du_stack.pseudo_order(),
            du_stack.input_dim(),
            pjm.pseudo_order(),
            pjm.input_dim()
        )));
    }
    let mut dy = DVector::zeros(pjm.output_dim());
    for i in 0..pjm.pseudo_order() {
        dy.gemv(1.0, pjm.block(i), &du_stack.block(i), 1.0);
    }
    Ok(dy)
}

/// For a linear incremental plant the block gains are its coefficient
/// blocks verbatim; this just validates and wraps them.
pub fn pjm_from_linear_plant(blocks: &[DMatrix<f64>]) -> Result<PseudoJacobianMatrix> {
    PseudoJacobianMatrix::new(blocks.to_vec())
}

/// Recovers the block gains of a plant map by central differences.
///
/// `plant` maps an input window (newest first) to the next output;
/// `operating_inputs` is the window around which the plant is linearized
/// and must hold at least `pseudo_order` entries. Block `i` is the Jacobian
/// of the output with respect to window entry `i`.
pub fn pjm_finite_difference<F>(
    plant: F,
    operating_inputs: &[DVector<f64>],
    pseudo_order: usize,
    step: f64,
) -> Result<PseudoJacobianMatrix>
where
    F: Fn(&[DVector<f64>]) -> DVector<f64>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive and finite, got {step}"
        )));
    }
    if pseudo_order == 0 {
        return Err(Error::InvalidDimension(
            "pseudo order must be positive".into(),
        ));
    }
    if operating_inputs.len() < pseudo_order {
        return Err(Error::InvalidDimension(format!(
            "operating window holds {} inputs, need at least {pseudo_order}",
            operating_inputs.len()
        )));
    }
    let m_u = operating_inputs[0].len();
    if m_u == 0 || operating_inputs.iter().any(|u| u.len() != m_u) {
        return Err(Error::InvalidDimension(
            "operating inputs must share one positive dimension".into(),
        ));
    }
    let base = plant(operating_inputs);
    if base.iter().any(|v| !v.is_finite()) {
        return Err(Error::PlantEvaluation { lag: 0 });
    }
    let m_y = base.len();

    let mut window: Vec<DVector<f64>> = operating_inputs.to_vec();
    let mut blocks = Vec::with_capacity(pseudo_order);
    for lag in 0..pseudo_order {
        let mut block = DMatrix::zeros(m_y, m_u);
        for col in 0..m_u {
            let nominal = window[lag][col];
            window[lag][col] = nominal + step;
            let plus = plant(&window);
            window[lag][col] = nominal - step;
            let minus = plant(&window);
            window[lag][col] = nominal;
            if plus.len() != m_y
                || minus.len() != m_y
                || plus.iter().chain(minus.iter()).any(|v| !v.is_finite())
            {
                return Err(Error::PlantEvaluation { lag: lag + 1 });
            }
            for row in 0..m_y {
                block[(row, col)] = (plus[row] - minus[row]) / (2.0 * step);
            }
        }
        blocks.push(block);
    }
    PseudoJacobianMatrix::new(blocks)
}
