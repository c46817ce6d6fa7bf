//! Reference trajectory generators, evaluable at any step including the
//! future samples the horizon stack needs.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSignal {
    Constant {
        value: f64,
    },
    /// Zero before `start`, `amplitude` from `start` on.
    Step {
        amplitude: f64,
        start: usize,
    },
    Ramp {
        slope: f64,
    },
    /// `offset + amplitude * sin(2*pi*(k - shift)/period)`.
    Sinusoid {
        amplitude: f64,
        period: f64,
        offset: f64,
        shift: f64,
    },
    /// Sum of parts.
    Composite(Vec<ReferenceSignal>),
}

impl ReferenceSignal {
    pub fn eval(&self, k: usize) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Step { amplitude, start } => {
                if k >= *start {
                    *amplitude
                } else {
                    0.0
                }
            }
            Self::Ramp { slope } => slope * k as f64,
            Self::Sinusoid {
                amplitude,
                period,
                offset,
                shift,
            } => {
                offset
                    + amplitude * (2.0 * std::f64::consts::PI * (k as f64 - shift) / period).sin()
            }
            Self::Composite(parts) => parts.iter().map(|p| p.eval(k)).sum(),
        }
    }
}

/// One reference signal per plant output.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoReference {
    signals: Vec<ReferenceSignal>,
}

impl MimoReference {
    pub fn new(signals: Vec<ReferenceSignal>) -> Result<Self> {
        if signals.is_empty() {
            return Err(Error::InvalidInput(
                "need at least one reference signal".into(),
            ));
        }
        Ok(Self { signals })
    }

    pub fn output_dim(&self) -> usize {
        self.signals.len()
    }

    pub fn eval(&self, k: usize) -> DVector<f64> {
        DVector::from_fn(self.signals.len(), |i, _| self.signals[i].eval(k))
    }

    /// Stacked future samples `[r(k+1); ...; r(k+n)]`.
    pub fn stacked_future(&self, k: usize, n: usize) -> DVector<f64> {
        let m = self.signals.len();
        let mut out = DVector::zeros(n * m);
        for step in 1..=n {
            out.rows_mut((step - 1) * m, m)
                .copy_from(&self.eval(k + step));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sinusoid_matches_half_period_form() {
        // amplitude sin(pi*(k-1)/100) has period 200 and unit shift.
        let s = ReferenceSignal::Sinusoid {
            amplitude: 1.0,
            period: 200.0,
            offset: 0.0,
            shift: 1.0,
        };
        for k in [1usize, 26, 51, 101, 151] {
            let expected = (std::f64::consts::PI * (k as f64 - 1.0) / 100.0).sin();
            assert_abs_diff_eq!(s.eval(k), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn stacked_future_orders_steps() {
        let refs = MimoReference::new(vec![
            ReferenceSignal::Ramp { slope: 1.0 },
            ReferenceSignal::Constant { value: 5.0 },
        ])
        .unwrap();
        let stack = refs.stacked_future(10, 2);
        assert_eq!(stack, DVector::from_vec(vec![11.0, 5.0, 12.0, 5.0]));
    }

    #[test]
    fn step_and_composite() {
        let s = ReferenceSignal::Composite(vec![
            ReferenceSignal::Step {
                amplitude: 2.0,
                start: 5,
            },
            ReferenceSignal::Constant { value: 1.0 },
        ]);
        assert_eq!(s.eval(4), 1.0);
        assert_eq!(s.eval(5), 3.0);
    }
}
