//! Command-line front end for the control toolkit.
//!
//! Subcommands: `run-example` (bundled scenarios), `run` (configured
//! closed-loop runs), `stability` (root reports and weight sweeps),
//! `gradcheck` (estimator gradient validation) and `train` (offline
//! estimator training with checkpoints).
//!
//! Exit codes: 0 success (a flagged divergence still exits 0), 1 runtime
//! non-convergence, 2 usage or configuration error.

mod config;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Deserialize;

use mfapc_core::edlm::PseudoJacobianMatrix;
use mfapc_core::error::Error as CoreError;
use mfapc_core::estimators::{
    mlp_gradient_check, rbf_gradient_check, save_checkpoint, ModelCheckpoint, GRADCHECK_TOLERANCE,
};
use mfapc_core::simkit::{
    generate_training_data, presets, remark2_demo, run_closed_loop, SimTrace,
};
use mfapc_core::stability::{characteristic_matrix, stability_margin, RootReport};

use config::{build_scenario, parse_config, render_config, ConfigError};
use plot::{chart_from_prefix, TraceTable};

#[derive(Parser)]
#[command(
    name = "mfapc",
    version,
    about = "Model-free adaptive predictive control toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bundled scenario: 1.1, 1.2, 1.3 or remark2.
    RunExample {
        /// Scenario id.
        id: String,
        /// Seed for randomly initialized estimators.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default `out-<id>`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a closed loop described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Root report for a frozen gain matrix and move weight(s).
    Stability {
        /// TOML file with `rows`, `cols` and per-lag `blocks` (row-major).
        #[arg(long)]
        pjm: Option<PathBuf>,
        /// Bundled plant id (`two-output-fir`).
        #[arg(long)]
        plant: Option<String>,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        nu: usize,
        /// Single uniform move weight.
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
        /// Sweep `lo:hi:step`; emits CSV (lambda, max root modulus, verdict).
        #[arg(long, allow_hyphen_values = true)]
        lambda_sweep: Option<String>,
        /// Write the sweep CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic estimator gradients against finite differences.
    Gradcheck {
        /// `mlp` or `rbf`.
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Offline-train the configured estimator and write a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CmdError {
    /// Bad arguments or configuration: exit 2.
    Usage(String),
    /// The run itself failed (non-convergence, singular systems): exit 1.
    Runtime(String),
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Usage(e.0)
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Runtime(format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunExample { id, seed, out } => cmd_run_example(&id, seed, out),
        Command::Run { config, seed, out } => cmd_run(&config, seed, out),
        Command::Stability {
            pjm,
            plant,
            n,
            nu,
            lambda,
            lambda_sweep,
            out,
        } => cmd_stability(pjm, plant, n, nu, lambda, lambda_sweep, out),
        Command::Gradcheck {
            family,
            trials,
            seed,
        } => cmd_gradcheck(&family, trials, seed),
        Command::Train { config, out } => cmd_train(&config, out),
    };
    match result {
        Ok(code) => code,
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CmdError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Writes trace.csv, the standard plots and summary.txt; returns the trace
/// CSV text for further inspection.
fn write_artifacts(
    dir: &Path,
    trace: &SimTrace,
    summary_extra: &[String],
) -> Result<String, CmdError> {
    fs::create_dir_all(dir)?;
    let csv = trace.csv_string();
    fs::write(dir.join("trace.csv"), &csv)?;

    // Plots are views over the written CSV.
    let table = TraceTable::parse(&csv).map_err(CmdError::Runtime)?;
    fs::write(
        dir.join("tracking.svg"),
        chart_from_prefix(&table, "outputs vs reference", &["y_", "yref_"]),
    )?;
    fs::write(
        dir.join("inputs.svg"),
        chart_from_prefix(&table, "control inputs", &["u_"]),
    )?;
    if !table.columns_with_prefix("phi_").is_empty() {
        fs::write(
            dir.join("pjm.svg"),
            chart_from_prefix(&table, "estimated gain entries", &["phi_"]),
        )?;
    }
    if !table.columns_with_prefix("lambda_").is_empty() {
        fs::write(
            dir.join("lambda.svg"),
            chart_from_prefix(&table, "move weights", &["lambda_"]),
        )?;
    }

    let mut summary = vec![
        format!("records={}", trace.records.len()),
        format!("diverged={}", trace.diverged),
    ];
    if let Some(step) = trace.divergence_step {
        summary.push(format!("divergence_step={step}"));
    }
    summary.push(format!("rms_error={}", trace.rms_error));
    summary.push(format!(
        "max_abs_error_post_transient={}",
        trace.max_abs_error_after(trace.transient_skip)
    ));
    summary.push(format!("max_abs_output={}", trace.max_abs_output));
    if let Some(epochs) = trace.offline_epochs {
        summary.push(format!("offline_epochs={epochs}"));
    }
    summary.extend_from_slice(summary_extra);
    fs::write(dir.join("summary.txt"), summary.join("\n") + "\n")?;
    Ok(csv)
}

/// Stability line for the summary, computed at the final recorded gain
/// estimate when the move weight is a uniform scalar.
fn stability_summary_line(
    trace: &SimTrace,
    n: usize,
    n_u: usize,
    lambda: Option<f64>,
) -> Vec<String> {
    let (Some(lambda), Some(rec)) = (lambda, trace.records.iter().rev().find(|r| r.pjm.is_some()))
    else {
        return Vec::new();
    };
    let flat = rec.pjm.as_ref().unwrap();
    let cols = trace.pjm_len / trace.output_dim;
    let wide = DMatrix::from_fn(trace.output_dim, cols, |r, c| flat[r * cols + c]);
    let Ok(pjm) = mfapc_core::estimators::rows_to_pjm(&wide, trace.input_dim) else {
        return Vec::new();
    };
    match characteristic_matrix(&pjm, n, n_u, lambda).and_then(|cm| stability_margin(&cm)) {
        Ok(report) => vec![format!(
            "stability_at_final_gains={} max_root_modulus={}",
            if !report.stable {
                "unstable"
            } else if report.marginal {
                "marginal"
            } else {
                "stable"
            },
            report.max_modulus
        )],
        Err(_) => Vec::new(),
    }
}

fn cmd_run_example(
    id: &str,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExitCode, CmdError> {
    let out_dir = out.unwrap_or_else(|| PathBuf::from(format!("out-{id}")));
    let mut extra = Vec::new();
    let (trace, n, n_u, lambda) = match id {
        "1.1" => {
            let scenario = presets::scenario_1_1(seed.unwrap_or(0))
                .map_err(|e| CmdError::Usage(e.to_string()))?;
            (run_scenario(scenario)?, 2, 2, Some(0.01))
        }
        "1.2" => {
            let scenario = presets::scenario_1_2(seed.unwrap_or(3))
                .map_err(|e| CmdError::Usage(e.to_string()))?;
            (run_scenario(scenario)?, 2, 2, Some(0.01))
        }
        "1.3" => {
            let scenario = presets::scenario_1_3(seed.unwrap_or(0))
                .map_err(|e| CmdError::Usage(e.to_string()))?;
            (run_scenario(scenario)?, 2, 2, None)
        }
        "remark2" => {
            let (trace, coeffs) = remark2_demo(3, 200).map_err(core_runtime)?;
            extra.push(format!(
                "truncated_gain_coefficients={}",
                coeffs
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ));
            (trace, 2, 2, Some(0.01))
        }
        other => {
            return Err(CmdError::Usage(format!(
                "unknown scenario id `{other}`; expected 1.1, 1.2, 1.3 or remark2"
            )))
        }
    };
    extra.splice(0..0, stability_summary_line(&trace, n, n_u, lambda));
    write_artifacts(&out_dir, &trace, &extra)?;
    if trace.diverged {
        println!(
            "warning: run diverged at step {}; trace truncated",
            trace.divergence_step.unwrap_or(0)
        );
    }
    println!(
        "scenario {id}: {} records, rms_error={}, artifacts in {}",
        trace.records.len(),
        trace.rms_error,
        out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_scenario(scenario: mfapc_core::simkit::Scenario) -> Result<SimTrace, CmdError> {
    run_closed_loop(scenario).map_err(core_runtime)
}

fn core_runtime(e: CoreError) -> CmdError {
    CmdError::Runtime(e.to_string())
}

fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExitCode, CmdError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CmdError::Usage(format!("cannot read {}: {e}", config_path.display())))?;
    let config = parse_config(&text)?;
    let scenario = build_scenario(&config, seed)?;
    let n = config.controller.prediction_horizon;
    let n_u = config.controller.control_horizon;
    let uniform_lambda = match (&config.controller.lambda, &config.tuner) {
        (config::LambdaSpec::Uniform(v), None) => Some(*v),
        _ => None,
    };

    let trace = run_scenario(scenario)?;
    let out_dir = out.unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("config.echo"), render_config(&config))?;
    let extra = stability_summary_line(&trace, n, n_u, uniform_lambda);
    write_artifacts(&out_dir, &trace, &extra)?;
    if trace.diverged {
        println!(
            "warning: run diverged at step {}; trace truncated",
            trace.divergence_step.unwrap_or(0)
        );
    }
    println!(
        "run complete: {} records, rms_error={}, artifacts in {}",
        trace.records.len(),
        trace.rms_error,
        out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PjmFile {
    rows: usize,
    cols: usize,
    /// One row-major entry list per lag block.
    blocks: Vec<Vec<f64>>,
}

fn load_pjm(pjm: Option<PathBuf>, plant: Option<String>) -> Result<PseudoJacobianMatrix, CmdError> {
    match (pjm, plant) {
        (Some(path), None) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| CmdError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let file: PjmFile = toml::from_str(&text)
                .map_err(|e| CmdError::Usage(format!("gain file parse error: {e}")))?;
            let blocks = file
                .blocks
                .iter()
                .map(|b| {
                    if b.len() != file.rows * file.cols {
                        Err(CmdError::Usage(format!(
                            "gain block needs {} entries, got {}",
                            file.rows * file.cols,
                            b.len()
                        )))
                    } else {
                        Ok(DMatrix::from_row_slice(file.rows, file.cols, b))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            PseudoJacobianMatrix::new(blocks).map_err(|e| CmdError::Usage(e.to_string()))
        }
        (None, Some(name)) => match name.as_str() {
            "two-output-fir" => PseudoJacobianMatrix::new(presets::two_output_fir_blocks())
                .map_err(|e| CmdError::Usage(e.to_string())),
            other => Err(CmdError::Usage(format!(
                "unknown plant id `{other}`; expected two-output-fir"
            ))),
        },
        _ => Err(CmdError::Usage(
            "exactly one of --pjm FILE or --plant NAME is required".into(),
        )),
    }
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>, CmdError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CmdError::Usage(format!(
            "sweep `{spec}` must be lo:hi:step"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| CmdError::Usage(format!("sweep `{spec}`: bad number `{p}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || hi < lo {
        return Err(CmdError::Usage(format!(
            "sweep `{spec}` needs lo <= hi and step > 0"
        )));
    }
    let mut values = Vec::new();
    let mut i = 0usize;
    loop {
        // Snap accumulated grid points to a 1e-10 grain.
        let v = ((lo + step * i as f64) * 1e10).round() / 1e10;
        if v > hi + 1e-12 {
            break;
        }
        values.push(v);
        i += 1;
    }
    Ok(values)
}

fn verdict(report: &RootReport) -> &'static str {
    if !report.stable {
        "unstable"
    } else if report.marginal {
        "marginal"
    } else {
        "stable"
    }
}

fn cmd_stability(
    pjm: Option<PathBuf>,
    plant: Option<String>,
    n: usize,
    nu: usize,
    lambda: Option<f64>,
    lambda_sweep: Option<String>,
    out: Option<PathBuf>,
) -> Result<ExitCode, CmdError> {
    let gains = load_pjm(pjm, plant)?;
    match (lambda, lambda_sweep) {
        (Some(value), None) => {
            let cm = characteristic_matrix(&gains, n, nu, value)
                .map_err(|e| CmdError::Usage(e.to_string()))?;
            let report = stability_margin(&cm).map_err(core_runtime)?;
            println!("lambda = {value}");
            println!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        (None, Some(spec)) => {
            let values = parse_sweep(&spec)?;
            let mut lines = vec!["lambda,max_root_modulus,verdict".to_string()];
            for v in values {
                let cm = characteristic_matrix(&gains, n, nu, v)
                    .map_err(|e| CmdError::Usage(e.to_string()))?;
                let report = stability_margin(&cm).map_err(core_runtime)?;
                lines.push(format!("{v},{},{}", report.max_modulus, verdict(&report)));
            }
            let text = lines.join("\n") + "\n";
            match out {
                Some(path) => {
                    fs::write(&path, &text)?;
                    println!("sweep written to {}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        _ => Err(CmdError::Usage(
            "exactly one of --lambda VALUE or --lambda-sweep lo:hi:step is required".into(),
        )),
    }
}

fn cmd_gradcheck(family: &str, trials: usize, seed: u64) -> Result<ExitCode, CmdError> {
    if trials == 0 {
        return Err(CmdError::Usage("--trials must be at least 1".into()));
    }
    let report = match family {
        "mlp" => mlp_gradient_check(trials, seed),
        "rbf" => rbf_gradient_check(trials, seed),
        other => {
            return Err(CmdError::Usage(format!(
                "unknown family `{other}`; expected mlp or rbf"
            )))
        }
    }
    .map_err(core_runtime)?;
    println!(
        "family={family} trials={} worst_rel_error={:e} tolerance={GRADCHECK_TOLERANCE:e} verdict={}",
        report.trials,
        report.worst_rel_error,
        if report.passed { "pass" } else { "fail" }
    );
    if report.passed {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn cmd_train(config_path: &Path, out: Option<PathBuf>) -> Result<ExitCode, CmdError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CmdError::Usage(format!("cannot read {}: {e}", config_path.display())))?;
    let config = parse_config(&text)?;
    if config.estimator.kind != "mlp-offline" {
        return Err(CmdError::Usage(
            "train requires estimator.kind = \"mlp-offline\"".into(),
        ));
    }
    let plant = config::build_plant(&config.plant)?;
    let train = config::build_train_spec(&config.estimator)?;
    let init = config::build_mlp_init(&config.estimator)?;

    let data = generate_training_data(
        plant.as_ref(),
        &train.input_signals,
        train.steps,
        config.controller.pseudo_order,
    )
    .map_err(core_runtime)?;

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.run.seed);
    let mut net = match init {
        mfapc_core::simkit::MlpInit::Explicit(net) => net,
        mfapc_core::simkit::MlpInit::Seeded { hidden, eta, alpha } => {
            let mut dims = vec![config.controller.pseudo_order * plant.input_dim()];
            dims.extend(hidden);
            dims.push(plant.output_dim());
            mfapc_core::estimators::MlpEstimator::seeded(&dims, eta, alpha, &mut rng)
                .map_err(|e| CmdError::Usage(e.to_string()))?
        }
    };

    let out_dir = out.unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out_dir)?;
    let checkpoint_path = out_dir.join("checkpoint.json");
    match net.train_offline(&data, train.threshold, train.epoch_cap) {
        Ok(report) => {
            save_checkpoint(&checkpoint_path, &ModelCheckpoint::Mlp(net))
                .map_err(|e| CmdError::Runtime(e.to_string()))?;
            println!(
                "epochs={} final_error={:e}",
                report.epochs, report.final_error
            );
            println!("checkpoint written to {}", checkpoint_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(CoreError::NonConvergence {
            epochs,
            final_error,
        }) => {
            println!("non-convergence: epochs={epochs} final_error={final_error:e}");
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(core_runtime(e)),
    }
}
