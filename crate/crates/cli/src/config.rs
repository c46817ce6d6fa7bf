//! Run configuration: sectioned key-value files (TOML). Unknown keys are
//! rejected; reloading a written config reproduces the run bit-exactly.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use mfapc_core::controller::{ControllerConfig, LambdaWeights};
use mfapc_core::estimators::{LambdaTuner, MlpEstimator};
use mfapc_core::simkit::{
    presets, CubicTwoInputPlant, EstimatorSpec, FirstOrderLinearPlant, LinearFirPlant,
    LinearIncrementalPlant, MimoReference, MlpInit, OfflineTrainSpec, Plant, RbfInit,
    ReferenceSignal, Scenario,
};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub plant: PlantSection,
    pub controller: ControllerSection,
    pub estimator: EstimatorSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuner: Option<TunerSection>,
    pub reference: Vec<SignalSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub hold_steps: usize,
    #[serde(default = "default_transient_skip")]
    pub transient_skip: usize,
}

fn default_transient_skip() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    /// cubic-two-input | two-output-fir | first-order | linear-fir |
    /// linear-incremental
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pole: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<BlockSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl BlockSpec {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>, ConfigError> {
        if self.rows * self.cols != self.data.len() {
            return err(format!(
                "plant.blocks: {}x{} block needs {} entries, got {}",
                self.rows,
                self.cols,
                self.rows * self.cols,
                self.data.len()
            ));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub prediction_horizon: usize,
    pub control_horizon: usize,
    pub pseudo_order: usize,
    pub lambda: LambdaSpec,
    #[serde(default)]
    pub pseudo_inverse_fallback: bool,
    #[serde(default)]
    pub double_integrator_mode: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum LambdaSpec {
    Uniform(f64),
    PerEntry(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    /// true-pjm | finite-difference | mlp-offline | mlp-online | rbf-online
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    /// seeded | preset-1-1
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub steps: usize,
    pub threshold: f64,
    #[serde(default = "default_epoch_cap")]
    pub epoch_cap: usize,
    pub signals: Vec<SignalSpec>,
}

fn default_epoch_cap() -> usize {
    100_000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TunerSection {
    /// preset-1-3 | seeded
    pub init: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    pub eta: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub net_eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub net_alpha: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    /// constant | step | ramp | sinusoid
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
}

impl SignalSpec {
    pub fn to_signal(&self, context: &str) -> Result<ReferenceSignal, ConfigError> {
        match self.kind.as_str() {
            "constant" => Ok(ReferenceSignal::Constant {
                value: self
                    .value
                    .ok_or(ConfigError(format!("{context}: constant needs `value`")))?,
            }),
            "step" => Ok(ReferenceSignal::Step {
                amplitude: self
                    .amplitude
                    .ok_or(ConfigError(format!("{context}: step needs `amplitude`")))?,
                start: self.start.unwrap_or(1),
            }),
            "ramp" => Ok(ReferenceSignal::Ramp {
                slope: self
                    .slope
                    .ok_or(ConfigError(format!("{context}: ramp needs `slope`")))?,
            }),
            "sinusoid" => Ok(ReferenceSignal::Sinusoid {
                amplitude: self.amplitude.ok_or(ConfigError(format!(
                    "{context}: sinusoid needs `amplitude`"
                )))?,
                period: self
                    .period
                    .ok_or(ConfigError(format!("{context}: sinusoid needs `period`")))?,
                offset: self.offset.unwrap_or(0.0),
                shift: self.shift.unwrap_or(0.0),
            }),
            other => err(format!("{context}: unknown signal kind `{other}`")),
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))
}

/// Canonical serialization; writing, reading and writing again is
/// byte-identical.
pub fn render_config(config: &RunConfig) -> String {
    toml::to_string_pretty(config).expect("config serializes")
}

pub fn build_plant(section: &PlantSection) -> Result<Box<dyn Plant>, ConfigError> {
    match section.kind.as_str() {
        "cubic-two-input" => Ok(Box::new(CubicTwoInputPlant)),
        "two-output-fir" => Ok(Box::new(
            LinearFirPlant::new(presets::two_output_fir_blocks())
                .expect("bundled blocks are valid"),
        )),
        "first-order" => {
            let pole = section
                .pole
                .ok_or(ConfigError("plant: first-order needs `pole`".into()))?;
            Ok(Box::new(FirstOrderLinearPlant::new(pole)))
        }
        "linear-fir" | "linear-incremental" => {
            let specs = section.blocks.as_ref().ok_or(ConfigError(format!(
                "plant: {} needs `blocks`",
                section.kind
            )))?;
            let blocks = specs
                .iter()
                .map(|b| b.to_matrix())
                .collect::<Result<Vec<_>, _>>()?;
            if section.kind == "linear-fir" {
                LinearFirPlant::new(blocks)
                    .map(|p| Box::new(p) as Box<dyn Plant>)
                    .map_err(|e| ConfigError(format!("plant.blocks: {e}")))
            } else {
                LinearIncrementalPlant::new(blocks)
                    .map(|p| Box::new(p) as Box<dyn Plant>)
                    .map_err(|e| ConfigError(format!("plant.blocks: {e}")))
            }
        }
        other => err(format!("plant: unknown kind `{other}`")),
    }
}

fn build_controller(section: &ControllerSection) -> Result<ControllerConfig, ConfigError> {
    if section.prediction_horizon == 0 {
        return err("controller.prediction_horizon must be at least 1");
    }
    if section.control_horizon == 0 || section.control_horizon > section.prediction_horizon {
        return err(format!(
            "controller.control_horizon ({}) must satisfy 1 <= control_horizon <= prediction_horizon ({})",
            section.control_horizon, section.prediction_horizon
        ));
    }
    if section.pseudo_order == 0 {
        return err("controller.pseudo_order must be at least 1");
    }
    let lambda = match &section.lambda {
        LambdaSpec::Uniform(v) => LambdaWeights::Uniform(*v),
        LambdaSpec::PerEntry(v) => LambdaWeights::PerEntry(v.clone()),
    };
    let mut cfg = ControllerConfig::new(
        section.prediction_horizon,
        section.control_horizon,
        section.pseudo_order,
        lambda,
    );
    cfg.pseudo_inverse_fallback = section.pseudo_inverse_fallback;
    cfg.double_integrator_mode = section.double_integrator_mode;
    Ok(cfg)
}

pub fn build_mlp_init(section: &EstimatorSection) -> Result<MlpInit, ConfigError> {
    let eta = section.eta.unwrap_or(0.5);
    let alpha = section.alpha.unwrap_or(0.0);
    match section.init.as_deref().unwrap_or("seeded") {
        "preset-1-1" => {
            let mut net = presets::scenario_1_1_initial_net();
            if section.eta.is_some() || section.alpha.is_some() {
                net = MlpEstimator::from_weights(net.weights().to_vec(), eta, alpha)
                    .map_err(|e| ConfigError(format!("estimator: {e}")))?;
            }
            Ok(MlpInit::Explicit(net))
        }
        "seeded" => Ok(MlpInit::Seeded {
            hidden: section.hidden.clone().unwrap_or_else(|| vec![6]),
            eta,
            alpha,
        }),
        other => err(format!("estimator.init: unknown mode `{other}`")),
    }
}

pub fn build_train_spec(section: &EstimatorSection) -> Result<OfflineTrainSpec, ConfigError> {
    let train = section.train.as_ref().ok_or(ConfigError(
        "estimator: mlp-offline needs a [estimator.train] section".into(),
    ))?;
    if !(train.threshold > 0.0) {
        return err("estimator.train.threshold must be positive");
    }
    let signals = train
        .signals
        .iter()
        .map(|s| s.to_signal("estimator.train.signals"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OfflineTrainSpec {
        input_signals: signals,
        steps: train.steps,
        threshold: train.threshold,
        epoch_cap: train.epoch_cap,
    })
}

fn build_estimator(section: &EstimatorSection) -> Result<EstimatorSpec, ConfigError> {
    match section.kind.as_str() {
        "true-pjm" => Ok(EstimatorSpec::TruePjm),
        "finite-difference" => Ok(EstimatorSpec::FiniteDifference {
            step: section.fd_step.unwrap_or(mfapc_core::edlm::DEFAULT_FD_STEP),
        }),
        "mlp-offline" => Ok(EstimatorSpec::MlpOffline {
            init: build_mlp_init(section)?,
            train: build_train_spec(section)?,
        }),
        "mlp-online" => Ok(EstimatorSpec::MlpOnline {
            init: build_mlp_init(section)?,
        }),
        "rbf-online" => Ok(EstimatorSpec::RbfOnline {
            init: RbfInit::Seeded {
                nodes: section.nodes.unwrap_or(6),
                eta: section.eta.unwrap_or(0.5),
                alpha: section.alpha.unwrap_or(0.0),
            },
        }),
        other => err(format!("estimator: unknown kind `{other}`")),
    }
}

fn build_tuner(
    section: &TunerSection,
    lambda_len: usize,
    output_dim: usize,
) -> Result<LambdaTuner, ConfigError> {
    let net = match section.init.as_str() {
        "preset-1-3" => presets::scenario_1_3_tuner_net(),
        "seeded" => {
            let hidden = section.hidden.clone().unwrap_or_else(|| vec![6]);
            let mut dims = vec![lambda_len];
            dims.extend(hidden);
            dims.push(output_dim);
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
            MlpEstimator::seeded(
                &dims,
                section.net_eta.unwrap_or(0.5),
                section.net_alpha.unwrap_or(0.05),
                &mut rng,
            )
            .map_err(|e| ConfigError(format!("tuner: {e}")))?
        }
        other => return err(format!("tuner.init: unknown mode `{other}`")),
    };
    let cost = section
        .cost_weights
        .clone()
        .unwrap_or_else(|| vec![1.0; output_dim]);
    if cost.len() != output_dim {
        return err(format!(
            "tuner.cost_weights has {} entries for a {}-output plant",
            cost.len(),
            output_dim
        ));
    }
    LambdaTuner::new(net, DVector::from_vec(cost), section.eta, section.alpha)
        .map_err(|e| ConfigError(format!("tuner: {e}")))
}

/// Builds the full scenario, validating every section. `seed_override`
/// takes precedence over the config's seed.
pub fn build_scenario(
    config: &RunConfig,
    seed_override: Option<u64>,
) -> Result<Scenario, ConfigError> {
    if config.run.steps == 0 {
        return err("run.steps must be at least 1");
    }
    let plant = build_plant(&config.plant)?;
    let controller = build_controller(&config.controller)?;
    if let LambdaSpec::PerEntry(v) = &config.controller.lambda {
        let expected = config.controller.control_horizon * plant.input_dim();
        if v.len() != expected {
            return err(format!(
                "controller.lambda has {} entries, control_horizon * input_dim = {expected}",
                v.len()
            ));
        }
    }
    if config.reference.len() != plant.output_dim() {
        return err(format!(
            "reference: {} signals for a {}-output plant",
            config.reference.len(),
            plant.output_dim()
        ));
    }
    let signals = config
        .reference
        .iter()
        .map(|s| s.to_signal("reference"))
        .collect::<Result<Vec<_>, _>>()?;
    let reference = MimoReference::new(signals).map_err(|e| ConfigError(e.to_string()))?;
    let estimator = build_estimator(&config.estimator)?;
    let tuner = match &config.tuner {
        Some(t) => Some(build_tuner(
            t,
            config.controller.control_horizon * plant.input_dim(),
            plant.output_dim(),
        )?),
        None => None,
    };

    let mut scenario = Scenario::new(plant, controller, estimator, reference, config.run.steps);
    scenario.tuner = tuner;
    scenario.hold_steps = config.run.hold_steps;
    scenario.seed = seed_override.unwrap_or(config.run.seed);
    scenario.transient_skip = config.run.transient_skip;
    Ok(scenario)
}
