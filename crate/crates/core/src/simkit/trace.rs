//! Per-step simulation records and their CSV projection.

use std::io::{self, Write};

use nalgebra::DVector;

#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub k: usize,
    pub y: DVector<f64>,
    pub y_ref: DVector<f64>,
    pub u: DVector<f64>,
    pub error: DVector<f64>,
    /// Estimated block gains, wide layout flattened row-major; absent
    /// while no estimate is active.
    pub pjm: Option<DVector<f64>>,
    /// Move weights in effect; recorded only for tuned runs.
    pub lambda: Option<DVector<f64>>,
    pub note: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub records: Vec<SimRecord>,
    pub output_dim: usize,
    pub input_dim: usize,
    /// Flattened gain entries per record (output_dim * pseudo_order * input_dim).
    pub pjm_len: usize,
    /// Present when the run adapts its move weights.
    pub lambda_len: Option<usize>,
    pub diverged: bool,
    pub divergence_step: Option<usize>,
    /// Epochs spent in offline training before the loop, when applicable.
    pub offline_epochs: Option<usize>,
    /// Steps excluded from the RMS window.
    pub transient_skip: usize,
    /// RMS tracking error over the post-transient window.
    pub rms_error: f64,
    pub max_abs_output: f64,
}

impl SimTrace {
    /// RMS of the tracking error over records with `k > skip`, averaged
    /// over steps and outputs.
    pub fn compute_rms(&self, skip: usize) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for r in self.records.iter().filter(|r| r.k > skip) {
            sum += r.error.norm_squared();
            count += r.error.len();
        }
        if count == 0 {
            f64::NAN
        } else {
            (sum / count as f64).sqrt()
        }
    }

    pub fn compute_max_abs_output(&self) -> f64 {
        self.records
            .iter()
            .flat_map(|r| r.y.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_error_after(&self, skip: usize) -> f64 {
        self.records
            .iter()
            .filter(|r| r.k > skip)
            .flat_map(|r| r.error.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let mut header: Vec<String> = vec!["k".into()];
        for i in 1..=self.output_dim {
            header.push(format!("y_{i}"));
        }
        for i in 1..=self.output_dim {
            header.push(format!("yref_{i}"));
        }
        for i in 1..=self.input_dim {
            header.push(format!("u_{i}"));
        }
        for i in 1..=self.output_dim {
            header.push(format!("e_{i}"));
        }
        if self.pjm_len > 0 {
            let cols = self.pjm_len / self.output_dim;
            for r in 1..=self.output_dim {
                for c in 1..=cols {
                    header.push(format!("phi_{r}_{c}"));
                }
            }
        }
        if let Some(n) = self.lambda_len {
            for i in 1..=n {
                header.push(format!("lambda_{i}"));
            }
        }
        writeln!(out, "{}", header.join(","))?;

        for rec in &self.records {
            let mut fields: Vec<String> = vec![rec.k.to_string()];
            for v in rec
                .y
                .iter()
                .chain(rec.y_ref.iter())
                .chain(rec.u.iter())
                .chain(rec.error.iter())
            {
                fields.push(v.to_string());
            }
            if self.pjm_len > 0 {
                match &rec.pjm {
                    Some(p) => fields.extend(p.iter().map(|v| v.to_string())),
                    None => fields.extend(std::iter::repeat_n(String::new(), self.pjm_len)),
                }
            }
            if let Some(n) = self.lambda_len {
                match &rec.lambda {
                    Some(l) => fields.extend(l.iter().map(|v| v.to_string())),
                    None => fields.extend(std::iter::repeat_n(String::new(), n)),
                }
            }
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}
