//! Bundled demonstration scenarios, addressable by the CLI ids
//! `1.1`, `1.2`, `1.3` and `remark2`.

use nalgebra::{DMatrix, DVector};

use super::plant::{CubicTwoInputPlant, LinearFirPlant};
use super::reference::{MimoReference, ReferenceSignal};
use super::{EstimatorSpec, MlpInit, OfflineTrainSpec, RbfInit, Scenario};
use crate::controller::{ControllerConfig, LambdaWeights};
use crate::error::Result;
use crate::estimators::{LambdaTuner, MlpEstimator};

/// Excitation used to generate the offline training set for scenario 1.1:
/// both inputs follow a 200-step sinusoid at amplitudes 0.9 and 0.6.
pub fn offline_excitation_signals() -> Vec<ReferenceSignal> {
    [0.9, 0.6]
        .into_iter()
        .map(|amplitude| ReferenceSignal::Sinusoid {
            amplitude,
            period: 200.0,
            offset: 0.0,
            shift: 0.0,
        })
        .collect()
}

/// Fixed starting weights of the scenario-1.1 network (4-6-1, no biases).
pub fn scenario_1_1_initial_net() -> MlpEstimator {
    let w1_t = [
        [-8.0, -1.0, -6.0, -7.0, 9.0, 1.0],
        [4.0, 5.0, -9.0, 3.0, 4.0, -2.0],
        [1.0, -5.0, 4.0, 6.0, -2.0, 7.0],
        [7.0, -1.0, -3.0, 2.0, 8.0, -3.0],
    ];
    let mut w1 = DMatrix::zeros(6, 4);
    for (c, col) in w1_t.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            w1[(r, c)] = 0.1 * v;
        }
    }
    let w2 = DMatrix::from_row_slice(1, 6, &[-0.1, -0.3, 0.7, -0.5, 0.8, -0.2]);
    MlpEstimator::from_weights(vec![w1, w2], 0.5, 0.05).expect("fixed weights are well formed")
}

/// Gain blocks of the two-output FIR plant used by scenarios 1.3 and the
/// stability demos.
pub fn two_output_fir_blocks() -> Vec<DMatrix<f64>> {
    vec![
        DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.8, 1.2]),
        DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.4, 0.7]),
    ]
}

/// Fixed starting weights of the scenario-1.3 tuning network. The hidden
/// layer matches the 4-6 layout of scenario 1.1; the single published
/// readout row is replicated per plant output.
pub fn scenario_1_3_tuner_net() -> MlpEstimator {
    let mut w1 = DMatrix::zeros(6, 4);
    for (c, v) in [-0.1, 0.2, -0.3, 0.4].into_iter().enumerate() {
        for r in 0..6 {
            w1[(r, c)] = v;
        }
    }
    let row = [0.1, -0.2, 0.3, -0.4, 0.5, -0.6];
    let w2 = DMatrix::from_fn(2, 6, |_, c| row[c]);
    MlpEstimator::from_weights(vec![w1, w2], 0.5, 0.05).expect("fixed weights are well formed")
}

/// Scenario 1.1: cubic two-input plant, offline-trained network estimator,
/// 200-step sinusoid reference.
pub fn scenario_1_1(seed: u64) -> Result<Scenario> {
    let controller = ControllerConfig::new(2, 2, 2, LambdaWeights::Uniform(0.01));
    let reference = MimoReference::new(vec![ReferenceSignal::Sinusoid {
        amplitude: 1.0,
        period: 200.0,
        offset: 0.0,
        shift: 1.0,
    }])?;
    let estimator = EstimatorSpec::MlpOffline {
        init: MlpInit::Explicit(scenario_1_1_initial_net()),
        train: OfflineTrainSpec {
            input_signals: offline_excitation_signals(),
            steps: 900,
            threshold: 0.002,
            epoch_cap: 75_000,
        },
    };
    let mut scenario = Scenario::new(
        Box::new(CubicTwoInputPlant),
        controller,
        estimator,
        reference,
        900,
    );
    scenario.hold_steps = 2;
    scenario.seed = seed;
    Ok(scenario)
}

/// Scenario 1.2: same plant and controller as 1.1, but an online
/// radial-basis estimator and an offset sinusoid reference.
pub fn scenario_1_2(seed: u64) -> Result<Scenario> {
    let controller = ControllerConfig::new(2, 2, 2, LambdaWeights::Uniform(0.01));
    let reference = MimoReference::new(vec![ReferenceSignal::Sinusoid {
        amplitude: 1.0,
        period: 200.0,
        offset: 1.0,
        shift: 0.0,
    }])?;
    let estimator = EstimatorSpec::RbfOnline {
        init: RbfInit::Seeded {
            nodes: 6,
            eta: 0.5,
            alpha: 0.05,
        },
    };
    let mut scenario = Scenario::new(
        Box::new(CubicTwoInputPlant),
        controller,
        estimator,
        reference,
        900,
    );
    scenario.hold_steps = 2;
    scenario.seed = seed;
    Ok(scenario)
}

/// Scenario 1.3: two-output FIR plant under its true gains with online
/// move-weight adaptation starting from zero weights.
pub fn scenario_1_3(seed: u64) -> Result<Scenario> {
    let controller = ControllerConfig::new(2, 2, 2, LambdaWeights::PerEntry(vec![0.0; 4]));
    let reference = MimoReference::new(vec![
        ReferenceSignal::Sinusoid {
            amplitude: 1.0,
            period: 200.0,
            offset: 0.0,
            shift: 0.0,
        },
        ReferenceSignal::Sinusoid {
            amplitude: 1.0,
            period: 20.0,
            offset: 0.0,
            shift: 0.0,
        },
    ])?;
    let tuner = LambdaTuner::new(
        scenario_1_3_tuner_net(),
        DVector::from_element(2, 1.0),
        0.5,
        0.0,
    )?;
    let mut scenario = Scenario::new(
        Box::new(LinearFirPlant::new(two_output_fir_blocks())?),
        controller,
        EstimatorSpec::TruePjm,
        reference,
        900,
    );
    scenario.tuner = Some(tuner);
    scenario.hold_steps = 2;
    scenario.seed = seed;
    Ok(scenario)
}
