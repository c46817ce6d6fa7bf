//! Scalar polynomials with real coefficients, ascending powers.

use nalgebra::{Complex, DMatrix};

/// Relative threshold below which a coefficient counts as zero.
const COEFF_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Poly(pub Vec<f64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(vec![0.0])
    }

    /// Single term `c * z^power`.
    pub fn term(c: f64, power: usize) -> Self {
        let mut coeffs = vec![0.0; power + 1];
        coeffs[power] = c;
        Poly(coeffs)
    }

    pub fn add_assign(&mut self, other: &Poly) {
        if other.0.len() > self.0.len() {
            self.0.resize(other.0.len(), 0.0);
        }
        for (i, c) in other.0.iter().enumerate() {
            self.0[i] += c;
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    pub fn eval_complex(&self, z: Complex<f64>) -> Complex<f64> {
        let mut acc = Complex::new(0.0, 0.0);
        for &c in self.0.iter().rev() {
            acc = acc * z + Complex::new(c, 0.0);
        }
        acc
    }

    pub fn eval(&self, z: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.0.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// True when every coefficient is negligible.
    pub fn is_zero(&self, scale: f64) -> bool {
        let tol = COEFF_TOL * scale.max(1e-300);
        self.0.iter().all(|c| c.abs() <= tol)
    }

    /// Splits off the `z^m` factor (leading ascending zeros) and trims
    /// negligible high-order coefficients. Returns the reduced polynomial
    /// and the multiplicity of the stripped zero root.
    pub fn strip(&self) -> (Poly, usize) {
        let scale = self.max_abs_coeff();
        let tol = COEFF_TOL * scale.max(1e-300);
        let mut hi = self.0.len();
        while hi > 1 && self.0[hi - 1].abs() <= tol {
            hi -= 1;
        }
        let mut lo = 0;
        while lo < hi - 1 && self.0[lo].abs() <= tol {
            lo += 1;
        }
        (Poly(self.0[lo..hi].to_vec()), lo)
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    /// Roots of the (already stripped) polynomial via the eigenvalues of
    /// its companion matrix.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        let d = self.degree();
        if d == 0 {
            return Vec::new();
        }
        let lead = self.0[d];
        let mut companion = DMatrix::zeros(d, d);
        for i in 1..d {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..d {
            companion[(i, d - 1)] = -self.0[i] / lead;
        }
        companion.complex_eigenvalues().iter().copied().collect()
    }
}
