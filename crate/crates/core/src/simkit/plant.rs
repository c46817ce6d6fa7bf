//! Discrete-time plant models.
//!
//! A plant maps lagged input and output histories (newest first) to the
//! next output. Histories passed in may be longer than the declared
//! windows; plants read only what they need.

use nalgebra::{DMatrix, DVector};

use crate::edlm::PseudoJacobianMatrix;
use crate::error::{Error, Result};

pub trait Plant: Send + Sync {
    fn output_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Number of lagged input samples the map reads (`u(k) ... u(k-n)`).
    fn input_window(&self) -> usize;
    /// Number of lagged output samples the map reads; zero for pure
    /// input-driven maps.
    fn output_window(&self) -> usize;
    /// Next output `y(k+1)` for histories `inputs = [u(k), u(k-1), ...]`,
    /// `outputs = [y(k), y(k-1), ...]`.
    fn step(&self, inputs: &[DVector<f64>], outputs: &[DVector<f64>]) -> DVector<f64>;
    /// Analytic block gains at the given operating inputs (newest first),
    /// when the plant knows them.
    fn true_pjm(
        &self,
        inputs: &[DVector<f64>],
        pseudo_order: usize,
    ) -> Option<PseudoJacobianMatrix> {
        let _ = (inputs, pseudo_order);
        None
    }
}

/// Two-input single-output map with a cubic second channel:
/// `y(k+1) = u1(k) + 0.4 u2(k)^3 + 0.5 u1(k-1) + 0.6 u2(k-1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CubicTwoInputPlant;

impl Plant for CubicTwoInputPlant {
    fn output_dim(&self) -> usize {
        1
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn input_window(&self) -> usize {
        2
    }

    fn output_window(&self) -> usize {
        0
    }

    fn step(&self, inputs: &[DVector<f64>], _outputs: &[DVector<f64>]) -> DVector<f64> {
        let (now, prev) = (&inputs[0], &inputs[1]);
        DVector::from_element(
            1,
            now[0] + 0.4 * now[1].powi(3) + 0.5 * prev[0] + 0.6 * prev[1],
        )
    }

    fn true_pjm(
        &self,
        inputs: &[DVector<f64>],
        pseudo_order: usize,
    ) -> Option<PseudoJacobianMatrix> {
        let u2 = inputs.first()?[1];
        let mut blocks = vec![DMatrix::from_row_slice(1, 2, &[1.0, 1.2 * u2 * u2])];
        if pseudo_order >= 2 {
            blocks.push(DMatrix::from_row_slice(1, 2, &[0.5, 0.6]));
        }
        while blocks.len() < pseudo_order {
            blocks.push(DMatrix::zeros(1, 2));
        }
        PseudoJacobianMatrix::new(blocks).ok()
    }
}

/// Finite-impulse-response plant `y(k+1) = sum_i H_i u(k-i)`.
#[derive(Debug, Clone)]
pub struct LinearFirPlant {
    blocks: Vec<DMatrix<f64>>,
}

impl LinearFirPlant {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        PseudoJacobianMatrix::new(blocks.clone())?;
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }
}

impl Plant for LinearFirPlant {
    fn output_dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    fn input_dim(&self) -> usize {
        self.blocks[0].ncols()
    }

    fn input_window(&self) -> usize {
        self.blocks.len()
    }

    fn output_window(&self) -> usize {
        0
    }

    fn step(&self, inputs: &[DVector<f64>], _outputs: &[DVector<f64>]) -> DVector<f64> {
        let mut y = DVector::zeros(self.output_dim());
        for (i, b) in self.blocks.iter().enumerate() {
            y.gemv(1.0, b, &inputs[i], 1.0);
        }
        y
    }

    fn true_pjm(
        &self,
        _inputs: &[DVector<f64>],
        pseudo_order: usize,
    ) -> Option<PseudoJacobianMatrix> {
        let mut blocks: Vec<DMatrix<f64>> =
            self.blocks.iter().take(pseudo_order).cloned().collect();
        while blocks.len() < pseudo_order {
            blocks.push(DMatrix::zeros(self.output_dim(), self.input_dim()));
        }
        PseudoJacobianMatrix::new(blocks).ok()
    }
}

/// Pure incremental plant `y(k+1) = y(k) + sum_i G_i (u(k-i) - u(k-i-1))`.
#[derive(Debug, Clone)]
pub struct LinearIncrementalPlant {
    blocks: Vec<DMatrix<f64>>,
}

impl LinearIncrementalPlant {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        PseudoJacobianMatrix::new(blocks.clone())?;
        Ok(Self { blocks })
    }
}

impl Plant for LinearIncrementalPlant {
    fn output_dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    fn input_dim(&self) -> usize {
        self.blocks[0].ncols()
    }

    fn input_window(&self) -> usize {
        self.blocks.len() + 1
    }

    fn output_window(&self) -> usize {
        1
    }

    fn step(&self, inputs: &[DVector<f64>], outputs: &[DVector<f64>]) -> DVector<f64> {
        let mut y = outputs[0].clone();
        for (i, b) in self.blocks.iter().enumerate() {
            y.gemv(1.0, b, &(&inputs[i] - &inputs[i + 1]), 1.0);
        }
        y
    }

    fn true_pjm(
        &self,
        _inputs: &[DVector<f64>],
        pseudo_order: usize,
    ) -> Option<PseudoJacobianMatrix> {
        if pseudo_order < self.blocks.len() {
            return None;
        }
        let mut blocks = self.blocks.clone();
        while blocks.len() < pseudo_order {
            blocks.push(DMatrix::zeros(self.output_dim(), self.input_dim()));
        }
        PseudoJacobianMatrix::new(blocks).ok()
    }
}

/// Scalar first-order recursion `y(k+1) = pole * y(k) + u(k)`. Its impulse
/// response is `pole^(i-1)`, so the truncated block gains grow without
/// bound when the pole lies outside the unit circle.
#[derive(Debug, Clone, Copy)]
pub struct FirstOrderLinearPlant {
    pub pole: f64,
}

impl FirstOrderLinearPlant {
    pub fn new(pole: f64) -> Self {
        Self { pole }
    }

    /// Leading impulse-response coefficients `pole^(i-1)`, `i = 1..=len`.
    pub fn impulse_coefficients(&self, len: usize) -> Vec<f64> {
        (0..len).map(|i| self.pole.powi(i as i32)).collect()
    }
}

impl Plant for FirstOrderLinearPlant {
    fn output_dim(&self) -> usize {
        1
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn input_window(&self) -> usize {
        1
    }

    fn output_window(&self) -> usize {
        1
    }

    fn step(&self, inputs: &[DVector<f64>], outputs: &[DVector<f64>]) -> DVector<f64> {
        DVector::from_element(1, self.pole * outputs[0][0] + inputs[0][0])
    }

    fn true_pjm(
        &self,
        _inputs: &[DVector<f64>],
        pseudo_order: usize,
    ) -> Option<PseudoJacobianMatrix> {
        let blocks = self
            .impulse_coefficients(pseudo_order)
            .into_iter()
            .map(|c| DMatrix::from_element(1, 1, c))
            .collect();
        PseudoJacobianMatrix::new(blocks).ok()
    }
}

/// Rejects plants whose declared dimensions are degenerate.
pub(crate) fn check_plant(plant: &dyn Plant) -> Result<()> {
    if plant.output_dim() == 0 || plant.input_dim() == 0 || plant.input_window() == 0 {
        return Err(Error::InvalidDimension(
            "plant must declare positive dimensions and input window".into(),
        ));
    }
    Ok(())
}
