//! Closed-loop simulation harness: plant models, reference generators,
//! estimator wiring, training-data generation and trace capture.

pub mod plant;
pub mod presets;
pub mod reference;
pub mod trace;

pub use plant::{
    CubicTwoInputPlant, FirstOrderLinearPlant, LinearFirPlant, LinearIncrementalPlant, Plant,
};
pub use reference::{MimoReference, ReferenceSignal};
pub use trace::{SimRecord, SimTrace};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::controller::{mfapc_control, ControllerConfig, ControllerState, LambdaWeights};
use crate::edlm::{pjm_finite_difference, IncrementStack, PseudoJacobianMatrix};
use crate::error::{Error, Result};
use crate::estimators::{
    build_regressor, rows_to_pjm, LambdaTuner, MlpEstimator, RbfEstimator, RegressorMode,
};

/// Default bound on |y| beyond which a run is flagged divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Network initialization for estimator specs.
#[derive(Debug, Clone)]
pub enum MlpInit {
    /// Random weights on [-1, 1] drawn from the scenario seed.
    Seeded {
        hidden: Vec<usize>,
        eta: f64,
        alpha: f64,
    },
    Explicit(MlpEstimator),
}

#[derive(Debug, Clone)]
pub enum RbfInit {
    Seeded { nodes: usize, eta: f64, alpha: f64 },
    Explicit(RbfEstimator),
}

/// Offline training performed before the loop starts.
#[derive(Debug, Clone)]
pub struct OfflineTrainSpec {
    /// One excitation signal per plant input.
    pub input_signals: Vec<ReferenceSignal>,
    pub steps: usize,
    pub threshold: f64,
    pub epoch_cap: usize,
}

/// How the controller obtains its block-gain estimate each step.
#[derive(Debug, Clone)]
pub enum EstimatorSpec {
    /// Analytic gains from the plant itself.
    TruePjm,
    /// Central differences around the latest operating inputs.
    FiniteDifference { step: f64 },
    /// Feedforward network trained once before the loop, frozen afterwards.
    MlpOffline {
        init: MlpInit,
        train: OfflineTrainSpec,
    },
    /// Feedforward network trained on each measurement.
    MlpOnline { init: MlpInit },
    /// Radial-basis network trained on each measurement.
    RbfOnline { init: RbfInit },
}

/// Complete description of one closed-loop run.
pub struct Scenario {
    pub plant: Box<dyn Plant>,
    pub controller: ControllerConfig,
    pub estimator: EstimatorSpec,
    pub tuner: Option<LambdaTuner>,
    pub reference: MimoReference,
    pub steps: usize,
    /// Leading steps with the input held at its initial value.
    pub hold_steps: usize,
    pub seed: u64,
    pub divergence_threshold: f64,
    /// Steps excluded from the trace's RMS window.
    pub transient_skip: usize,
    pub initial_output: Option<DVector<f64>>,
    /// Input level before the loop starts (zero by default).
    pub initial_input: Option<DVector<f64>>,
}

impl Scenario {
    pub fn new(
        plant: Box<dyn Plant>,
        controller: ControllerConfig,
        estimator: EstimatorSpec,
        reference: MimoReference,
        steps: usize,
    ) -> Self {
        Self {
            plant,
            controller,
            estimator,
            tuner: None,
            reference,
            steps,
            hold_steps: 0,
            seed: 0,
            divergence_threshold: DIVERGENCE_THRESHOLD,
            transient_skip: 100,
            initial_output: None,
            initial_input: None,
        }
    }
}

/// Chronological signal history with an implicit constant prefix.
struct History {
    items: Vec<DVector<f64>>,
    prefix: DVector<f64>,
}

impl History {
    fn new(dim: usize) -> Self {
        Self {
            items: Vec::new(),
            prefix: DVector::zeros(dim),
        }
    }

    fn with_prefix(prefix: DVector<f64>) -> Self {
        Self {
            items: Vec::new(),
            prefix,
        }
    }

    fn push(&mut self, v: DVector<f64>) {
        self.items.push(v);
    }

    /// Newest-first window of the given length, prefix-padded before start.
    fn window(&self, len: usize) -> Vec<DVector<f64>> {
        let mut out: Vec<DVector<f64>> = self.items.iter().rev().take(len).cloned().collect();
        while out.len() < len {
            out.push(self.prefix.clone());
        }
        out
    }
}

enum RunEstimator {
    TruePjm,
    FiniteDifference { step: f64 },
    MlpFrozen(MlpEstimator),
    MlpOnline(MlpEstimator),
    RbfOnline(RbfEstimator),
}

/// Wide layout flattened row-major.
fn flatten_gains(pjm: &PseudoJacobianMatrix) -> DVector<f64> {
    let wide = pjm.as_wide_matrix();
    DVector::from_fn(wide.nrows() * wide.ncols(), |i, _| {
        wide[(i / wide.ncols(), i % wide.ncols())]
    })
}

/// Open-loop dataset generation: drives the plant with the given input
/// signals and pairs lagged-input regressors with the outputs they
/// produce.
pub fn generate_training_data(
    plant: &dyn Plant,
    input_signals: &[ReferenceSignal],
    steps: usize,
    pseudo_order: usize,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    plant::check_plant(plant)?;
    if input_signals.len() != plant.input_dim() {
        return Err(Error::InvalidInput(format!(
            "{} input signals for a {}-input plant",
            input_signals.len(),
            plant.input_dim()
        )));
    }
    if steps < plant.input_window() {
        return Err(Error::InvalidInput(format!(
            "need at least {} steps to cover the plant's input window",
            plant.input_window()
        )));
    }
    let mut inputs = History::new(plant.input_dim());
    let mut outputs = History::new(plant.output_dim());
    let mut data = Vec::with_capacity(steps);
    for k in 1..=steps {
        let u = DVector::from_fn(plant.input_dim(), |i, _| input_signals[i].eval(k));
        inputs.push(u);
        let y_next = plant.step(
            &inputs.window(plant.input_window()),
            &outputs.window(plant.output_window().max(1)),
        );
        let regressor = build_regressor(
            RegressorMode::InputLags { lags: pseudo_order },
            &inputs.window(pseudo_order),
            &[],
        )?;
        data.push((regressor, y_next.clone()));
        outputs.push(y_next);
    }
    Ok(data)
}

/// Runs one closed-loop scenario to completion (or divergence).
pub fn run_closed_loop(scenario: Scenario) -> Result<SimTrace> {
    let plant = scenario.plant.as_ref();
    plant::check_plant(plant)?;
    let m_y = plant.output_dim();
    let m_u = plant.input_dim();
    let cfg = &scenario.controller;
    let l = cfg.pseudo_order;
    let n = cfg.prediction_horizon;
    let n_u = cfg.control_horizon;
    if scenario.reference.output_dim() != m_y {
        return Err(Error::InvalidDimension(format!(
            "{} reference signals for a {m_y}-output plant",
            scenario.reference.output_dim()
        )));
    }
    if scenario.steps == 0 {
        return Err(Error::InvalidInput("steps must be at least 1".into()));
    }
    if let Some(y0) = &scenario.initial_output {
        if y0.len() != m_y {
            return Err(Error::InvalidDimension(
                "initial output length mismatch".into(),
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let regressor_len = l * m_u;
    let mut offline_epochs = None;
    let mut estimator = match &scenario.estimator {
        EstimatorSpec::TruePjm => RunEstimator::TruePjm,
        EstimatorSpec::FiniteDifference { step } => RunEstimator::FiniteDifference { step: *step },
        EstimatorSpec::MlpOffline { init, train } => {
            let mut net = build_mlp(init, regressor_len, m_y, &mut rng)?;
            let data = generate_training_data(plant, &train.input_signals, train.steps, l)?;
            let report = net.train_offline(&data, train.threshold, train.epoch_cap)?;
            offline_epochs = Some(report.epochs);
            RunEstimator::MlpFrozen(net)
        }
        EstimatorSpec::MlpOnline { init } => {
            RunEstimator::MlpOnline(build_mlp(init, regressor_len, m_y, &mut rng)?)
        }
        EstimatorSpec::RbfOnline { init } => {
            let net = match init {
                RbfInit::Seeded { nodes, eta, alpha } => {
                    RbfEstimator::seeded(*nodes, regressor_len, m_y, *eta, *alpha, &mut rng)?
                }
                RbfInit::Explicit(net) => net.clone(),
            };
            if net.input_dim() != regressor_len || net.output_dim() != m_y {
                return Err(Error::InvalidDimension(
                    "radial-basis network does not match the regressor layout".into(),
                ));
            }
            RunEstimator::RbfOnline(net)
        }
    };

    let mut lambda = cfg.lambda.diagonal(n_u * m_u)?;
    if let Some(tuner) = &scenario.tuner {
        if tuner.lambda_len() != lambda.len() {
            return Err(Error::InvalidDimension(format!(
                "tuner adapts {} weights, controller uses {}",
                tuner.lambda_len(),
                lambda.len()
            )));
        }
        if tuner.network().output_dim() != m_y {
            return Err(Error::InvalidDimension(
                "tuner network outputs do not match the plant".into(),
            ));
        }
    }
    let mut tuner = scenario.tuner;

    let u0 = scenario
        .initial_input
        .clone()
        .unwrap_or_else(|| DVector::zeros(m_u));
    if u0.len() != m_u {
        return Err(Error::InvalidDimension(
            "initial input length mismatch".into(),
        ));
    }
    let mut state = ControllerState::with_history(u0.clone(), IncrementStack::zeros(l, m_u)?)?;
    let mut inputs = History::with_prefix(u0);
    let mut outputs = History::new(m_y);
    let mut y = scenario
        .initial_output
        .clone()
        .unwrap_or_else(|| DVector::zeros(m_y));
    outputs.push(y.clone());

    let pjm_len = m_y * l * m_u;
    let mut records: Vec<SimRecord> = Vec::with_capacity(scenario.steps);
    let mut diverged = false;
    let mut divergence_step = None;
    let plant_in_window = plant.input_window().max(l + 1);
    let plant_out_window = plant.output_window().max(1);

    for k in 1..=scenario.steps {
        let y_ref = scenario.reference.eval(k);
        let error = &y_ref - &y;

        if y.iter().any(|v| !v.is_finite()) || y.amax() > scenario.divergence_threshold {
            records.push(SimRecord {
                k,
                y: y.clone(),
                y_ref,
                u: state.u_prev.clone(),
                error,
                pjm: None,
                lambda: tuner.as_ref().map(|_| lambda.clone()),
                note: Some("diverged"),
            });
            diverged = true;
            divergence_step = Some(k);
            break;
        }

        let (u, pjm_entries, note): (DVector<f64>, Option<DVector<f64>>, Option<&'static str>) =
            if k <= scenario.hold_steps {
                (state.u_prev.clone(), None, Some("hold"))
            } else {
                let pjm = match estimate_pjm(&mut estimator, plant, &inputs, &outputs, l, &y)? {
                    Some(p) => p,
                    None => {
                        return Err(Error::InvalidInput(
                            "plant provides no analytic gains for the requested order".into(),
                        ))
                    }
                };
                if let Some(t) = tuner.as_mut() {
                    match t.tune_step(&lambda, &y) {
                        Ok(next) => lambda = next,
                        Err(Error::TunerDiverged { .. }) => {
                            records.push(SimRecord {
                                k,
                                y: y.clone(),
                                y_ref: y_ref.clone(),
                                u: state.u_prev.clone(),
                                error: error.clone(),
                                pjm: Some(flatten_gains(&pjm)),
                                lambda: Some(lambda.clone()),
                                note: Some("diverged"),
                            });
                            diverged = true;
                            divergence_step = Some(k);
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                let mut step_cfg = cfg.clone();
                step_cfg.lambda = LambdaWeights::PerEntry(lambda.iter().copied().collect());
                let refs = scenario.reference.stacked_future(k, n);
                let (outcome, next_state) = mfapc_control(&state, &pjm, &y, &refs, &step_cfg)?;
                state = next_state;
                (outcome.u, Some(flatten_gains(&pjm)), None)
            };

        if u.iter().any(|v| !v.is_finite()) {
            records.push(SimRecord {
                k,
                y: y.clone(),
                y_ref,
                u,
                error,
                pjm: pjm_entries,
                lambda: tuner.as_ref().map(|_| lambda.clone()),
                note: Some("diverged"),
            });
            diverged = true;
            divergence_step = Some(k);
            break;
        }

        records.push(SimRecord {
            k,
            y: y.clone(),
            y_ref,
            u: u.clone(),
            error,
            pjm: pjm_entries,
            lambda: tuner.as_ref().map(|_| lambda.clone()),
            note,
        });

        // Hold steps bypass the controller, but the plant still advances.
        if k <= scenario.hold_steps {
            state.u_prev = u.clone();
        }
        inputs.push(u);
        y = plant.step(
            &inputs.window(plant_in_window),
            &outputs.window(plant_out_window),
        );
        outputs.push(y.clone());
    }

    let mut trace = SimTrace {
        records,
        output_dim: m_y,
        input_dim: m_u,
        pjm_len,
        lambda_len: tuner.as_ref().map(|_| lambda.len()),
        diverged,
        divergence_step,
        offline_epochs,
        transient_skip: scenario.transient_skip,
        rms_error: 0.0,
        max_abs_output: 0.0,
    };
    trace.rms_error = trace.compute_rms(scenario.transient_skip);
    trace.max_abs_output = trace.compute_max_abs_output();
    Ok(trace)
}

fn build_mlp(
    init: &MlpInit,
    regressor_len: usize,
    output_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<MlpEstimator> {
    let net = match init {
        MlpInit::Seeded { hidden, eta, alpha } => {
            let mut dims = vec![regressor_len];
            dims.extend_from_slice(hidden);
            dims.push(output_dim);
            MlpEstimator::seeded(&dims, *eta, *alpha, rng)?
        }
        MlpInit::Explicit(net) => net.clone(),
    };
    if net.input_dim() != regressor_len || net.output_dim() != output_dim {
        return Err(Error::InvalidDimension(format!(
            "network is {}-in/{}-out, regressor layout needs {}-in/{}-out",
            net.input_dim(),
            net.output_dim(),
            regressor_len,
            output_dim
        )));
    }
    Ok(net)
}

fn estimate_pjm(
    estimator: &mut RunEstimator,
    plant: &dyn Plant,
    inputs: &History,
    outputs: &History,
    pseudo_order: usize,
    y_now: &DVector<f64>,
) -> Result<Option<PseudoJacobianMatrix>> {
    let operating = inputs.window(pseudo_order.max(plant.input_window()));
    match estimator {
        RunEstimator::TruePjm => Ok(plant.true_pjm(&operating, pseudo_order)),
        RunEstimator::FiniteDifference { step } => {
            let out_window = outputs.window(plant.output_window().max(1));
            let pjm = pjm_finite_difference(
                |w| plant.step(w, &out_window),
                &operating,
                pseudo_order,
                *step,
            )?;
            Ok(Some(pjm))
        }
        RunEstimator::MlpFrozen(net) => {
            let regressor = build_regressor(
                RegressorMode::InputLags { lags: pseudo_order },
                &inputs.window(pseudo_order),
                &[],
            )?;
            let (_, cache) = net.forward(&regressor)?;
            let jac = net.input_jacobian(&cache)?;
            Ok(Some(rows_to_pjm(&jac, plant.input_dim())?))
        }
        RunEstimator::MlpOnline(net) => {
            let regressor = build_regressor(
                RegressorMode::InputLags { lags: pseudo_order },
                &inputs.window(pseudo_order),
                &[],
            )?;
            net.train_step(&regressor, y_now)?;
            let (_, cache) = net.forward(&regressor)?;
            let jac = net.input_jacobian(&cache)?;
            Ok(Some(rows_to_pjm(&jac, plant.input_dim())?))
        }
        RunEstimator::RbfOnline(net) => {
            let regressor = build_regressor(
                RegressorMode::InputLags { lags: pseudo_order },
                &inputs.window(pseudo_order),
                &[],
            )?;
            net.train_step(&regressor, y_now)?;
            let (_, cache) = net.forward(&regressor)?;
            let jac = net.input_jacobian(&cache)?;
            Ok(Some(rows_to_pjm(&jac, plant.input_dim())?))
        }
    }
}

/// Demonstration of the truncated impulse-response gains on an unstable
/// first-order plant: reports the truncated coefficients and the (typically
/// divergent) closed-loop trace.
pub fn remark2_demo(truncation_order: usize, steps: usize) -> Result<(SimTrace, Vec<f64>)> {
    if truncation_order == 0 {
        return Err(Error::InvalidParameter(
            "truncation order must be positive".into(),
        ));
    }
    let plant = FirstOrderLinearPlant::new(1.1);
    let coefficients = plant.impulse_coefficients(truncation_order);
    let controller = ControllerConfig::new(2, 2, truncation_order, LambdaWeights::Uniform(0.01));
    let reference = MimoReference::new(vec![ReferenceSignal::Step {
        amplitude: 1.0,
        start: 1,
    }])?;
    let mut scenario = Scenario::new(
        Box::new(plant),
        controller,
        EstimatorSpec::TruePjm,
        reference,
        steps,
    );
    scenario.divergence_threshold = 1e6;
    let trace = run_closed_loop(scenario)?;
    Ok((trace, coefficients))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    use crate::edlm::DEFAULT_FD_STEP;

    fn fir_blocks() -> Vec<DMatrix<f64>> {
        vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.8, 1.2]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.4, 0.7]),
        ]
    }

    #[test]
    fn training_data_covers_every_step_and_matches_the_plant() {
        let plant = CubicTwoInputPlant;
        let signals = vec![
            ReferenceSignal::Sinusoid {
                amplitude: 0.9,
                period: 200.0,
                offset: 0.0,
                shift: 0.0,
            },
            ReferenceSignal::Sinusoid {
                amplitude: 0.6,
                period: 200.0,
                offset: 0.0,
                shift: 0.0,
            },
        ];
        let data = generate_training_data(&plant, &signals, 900, 2).unwrap();
        assert_eq!(data.len(), 900);
        // Spot-check one pair: regressor holds [u(k); u(k-1)], the target
        // is the plant's response.
        let k = 250usize;
        let u = |k: usize| {
            DVector::from_vec(vec![
                0.9 * (std::f64::consts::PI * k as f64 / 100.0).sin(),
                0.6 * (std::f64::consts::PI * k as f64 / 100.0).sin(),
            ])
        };
        let (reg, target) = &data[k - 1];
        let expect_reg = DVector::from_vec(vec![u(k)[0], u(k)[1], u(k - 1)[0], u(k - 1)[1]]);
        assert_abs_diff_eq!(reg, &expect_reg, epsilon = 1e-12);
        let expect_y = plant.step(&[u(k), u(k - 1)], &[]);
        assert_abs_diff_eq!(target, &expect_y, epsilon = 1e-12);
    }

    #[test]
    fn training_data_trivial_inputs() {
        let plant = CubicTwoInputPlant;
        let zero = vec![
            ReferenceSignal::Constant { value: 0.0 },
            ReferenceSignal::Constant { value: 0.0 },
        ];
        let data = generate_training_data(&plant, &zero, 10, 2).unwrap();
        assert!(data.iter().all(|(_, t)| t[0] == 0.0));

        let ones = vec![
            ReferenceSignal::Constant { value: 1.0 },
            ReferenceSignal::Constant { value: 1.0 },
        ];
        let data = generate_training_data(&plant, &ones, 10, 2).unwrap();
        // After the lag fill the response settles at 1 + 0.4 + 0.5 + 0.6.
        assert_abs_diff_eq!(data.last().unwrap().1[0], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn deadbeat_loop_tracks_exactly_from_step_two() {
        let plant = LinearFirPlant::new(fir_blocks()).unwrap();
        let controller = ControllerConfig::new(1, 1, 2, LambdaWeights::Uniform(0.0));
        let reference = MimoReference::new(vec![
            ReferenceSignal::Sinusoid {
                amplitude: 1.0,
                period: 200.0,
                offset: 0.0,
                shift: 1.0,
            },
            ReferenceSignal::Constant { value: 0.7 },
        ])
        .unwrap();
        let scenario = Scenario::new(
            Box::new(plant),
            controller,
            EstimatorSpec::TruePjm,
            reference,
            60,
        );
        let trace = run_closed_loop(scenario).unwrap();
        assert!(!trace.diverged);
        assert_eq!(trace.records.len(), 60);
        for rec in trace.records.iter().filter(|r| r.k >= 2) {
            assert!(
                rec.error.amax() < 1e-10,
                "error at k = {} is {}",
                rec.k,
                rec.error.amax()
            );
        }
    }

    #[test]
    fn step_reference_settles_with_zero_static_error() {
        let plant = LinearFirPlant::new(fir_blocks()).unwrap();
        let controller = ControllerConfig::new(2, 2, 2, LambdaWeights::Uniform(0.01));
        let reference = MimoReference::new(vec![
            ReferenceSignal::Step {
                amplitude: 1.0,
                start: 1,
            },
            ReferenceSignal::Step {
                amplitude: 1.0,
                start: 1,
            },
        ])
        .unwrap();
        let scenario = Scenario::new(
            Box::new(plant),
            controller,
            EstimatorSpec::TruePjm,
            reference,
            300,
        );
        let trace = run_closed_loop(scenario).unwrap();
        assert!(!trace.diverged);
        for rec in trace.records.iter().filter(|r| r.k >= 200) {
            assert!(rec.error.amax() < 1e-6, "error at k = {}", rec.k);
        }
    }

    #[test]
    fn analytic_and_finite_difference_gains_agree_on_linear_plants() {
        let controller = ControllerConfig::new(2, 2, 2, LambdaWeights::Uniform(0.01));
        let reference = MimoReference::new(vec![
            ReferenceSignal::Sinusoid {
                amplitude: 1.0,
                period: 100.0,
                offset: 0.0,
                shift: 0.0,
            },
            ReferenceSignal::Sinusoid {
                amplitude: 0.5,
                period: 40.0,
                offset: 0.2,
                shift: 0.0,
            },
        ])
        .unwrap();
        let run = |estimator: EstimatorSpec| {
            let scenario = Scenario::new(
                Box::new(LinearFirPlant::new(fir_blocks()).unwrap()),
                controller.clone(),
                estimator,
                reference.clone(),
                120,
            );
            run_closed_loop(scenario).unwrap()
        };
        let a = run(EstimatorSpec::TruePjm);
        let b = run(EstimatorSpec::FiniteDifference {
            step: DEFAULT_FD_STEP,
        });
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_abs_diff_eq!(&ra.y, &rb.y, epsilon = 1e-9);
            assert_abs_diff_eq!(&ra.u, &rb.u, epsilon = 1e-9);
        }
    }

    #[test]
    fn truncated_gain_demo_diverges_and_reports_coefficients() {
        let (trace, coeffs) = remark2_demo(3, 200).unwrap();
        assert_eq!(coeffs.len(), 3);
        assert_abs_diff_eq!(coeffs[0], 1.0);
        assert_abs_diff_eq!(coeffs[1], 1.1);
        assert_abs_diff_eq!(coeffs[2], 1.21, epsilon = 1e-12);
        assert!(
            trace.max_abs_output > 1e3,
            "expected blow-up, max |y| = {}",
            trace.max_abs_output
        );
    }

    #[test]
    fn divergence_truncates_and_flags_the_trace() {
        let (trace, _) = remark2_demo(3, 2000).unwrap();
        assert!(trace.diverged);
        let step = trace.divergence_step.unwrap();
        assert_eq!(trace.records.len(), step);
        assert_eq!(trace.records.last().unwrap().note, Some("diverged"));
    }

    #[test]
    fn aggregates_match_recomputation() {
        let (trace, _) = remark2_demo(2, 50).unwrap();
        assert_eq!(
            trace.rms_error.to_bits(),
            trace.compute_rms(trace.transient_skip).to_bits()
        );
        assert_eq!(trace.max_abs_output, trace.compute_max_abs_output());
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let run = || {
            let scenario = Scenario {
                seed: 7,
                ..Scenario::new(
                    Box::new(CubicTwoInputPlant),
                    ControllerConfig::new(2, 2, 2, LambdaWeights::Uniform(0.01)),
                    EstimatorSpec::MlpOnline {
                        init: MlpInit::Seeded {
                            hidden: vec![6],
                            eta: 0.5,
                            alpha: 0.05,
                        },
                    },
                    MimoReference::new(vec![ReferenceSignal::Sinusoid {
                        amplitude: 1.0,
                        period: 200.0,
                        offset: 0.0,
                        shift: 1.0,
                    }])
                    .unwrap(),
                    150,
                )
            };
            run_closed_loop(run_scenario_fixup(scenario))
                .unwrap()
                .csv_string()
        };
        assert_eq!(run(), run());
    }

    fn run_scenario_fixup(mut s: Scenario) -> Scenario {
        s.hold_steps = 2;
        s
    }

    #[test]
    fn incremental_plant_follows_reference() {
        let plant = LinearIncrementalPlant::new(vec![DMatrix::from_element(1, 1, 1.5)]).unwrap();
        let controller = ControllerConfig::new(2, 1, 1, LambdaWeights::Uniform(0.01));
        let reference = MimoReference::new(vec![ReferenceSignal::Step {
            amplitude: 2.0,
            start: 1,
        }])
        .unwrap();
        let scenario = Scenario::new(
            Box::new(plant),
            controller,
            EstimatorSpec::TruePjm,
            reference,
            120,
        );
        let trace = run_closed_loop(scenario).unwrap();
        assert!(!trace.diverged);
        assert!(trace.max_abs_error_after(60) < 1e-8);
    }
}
