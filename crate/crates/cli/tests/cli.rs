//! End-to-end checks of the `mfapc` binary: artifacts, exit codes,
//! determinism and config round-trips.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfapc"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

const DEMO_CONFIG: &str = r#"
[run]
steps = 300
seed = 7

[plant]
kind = "two-output-fir"

[controller]
prediction_horizon = 2
control_horizon = 2
pseudo_order = 2
lambda = 0.01

[estimator]
kind = "true-pjm"

[[reference]]
kind = "step"
amplitude = 1.0

[[reference]]
kind = "step"
amplitude = 1.0
"#;

#[test]
fn run_example_produces_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run-example", "1.3", "--out", "ex"], dir.path());
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    for file in [
        "trace.csv",
        "tracking.svg",
        "inputs.svg",
        "pjm.svg",
        "lambda.svg",
        "summary.txt",
    ] {
        assert!(dir.path().join("ex").join(file).exists(), "missing {file}");
    }
    let trace = fs::read_to_string(dir.path().join("ex/trace.csv")).unwrap();
    assert!(trace.lines().count() > 900);
    assert!(trace.starts_with("k,y_1,y_2,yref_1,yref_2,u_1,u_2,e_1,e_2"));
}

#[test]
fn run_example_remark2_flags_divergence_but_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run-example", "remark2", "--out", "r2"], dir.path());
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("warning"), "stdout: {}", stdout(&out));
    let summary = fs::read_to_string(dir.path().join("r2/summary.txt")).unwrap();
    assert!(summary.contains("diverged=true"));
    assert!(summary.contains("truncated_gain_coefficients=1,1.1,1.21"));
}

#[test]
fn run_example_unknown_id_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run-example", "9.9"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown scenario id"));
}

#[test]
fn configured_run_writes_summary_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("demo.toml"), DEMO_CONFIG).unwrap();
    let out = run(&["run", "--config", "demo.toml", "--out", "o"], dir.path());
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("o/summary.txt")).unwrap();
    assert!(summary.contains("rms_error="));
    assert!(summary.contains("stability_at_final_gains=stable"));

    // The echoed config reproduces itself byte for byte.
    let echo1 = fs::read_to_string(dir.path().join("o/config.echo")).unwrap();
    let out = run(
        &["run", "--config", "o/config.echo", "--out", "o2"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let echo2 = fs::read_to_string(dir.path().join("o2/config.echo")).unwrap();
    assert_eq!(echo1, echo2);
}

#[test]
fn invalid_horizons_name_both_fields() {
    let dir = tempfile::tempdir().unwrap();
    let bad = DEMO_CONFIG.replace("control_horizon = 2", "control_horizon = 3");
    fs::write(dir.path().join("bad.toml"), bad).unwrap();
    let out = run(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("control_horizon") && msg.contains("prediction_horizon"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = DEMO_CONFIG.replace("seed = 7", "seed = 7\nmystery = 1");
    fs::write(dir.path().join("bad.toml"), bad).unwrap();
    let out = run(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mystery"));
}

#[test]
fn same_seed_gives_byte_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("demo.toml"), DEMO_CONFIG).unwrap();
    for out_dir in ["a", "b"] {
        let out = run(
            &[
                "run",
                "--config",
                "demo.toml",
                "--seed",
                "7",
                "--out",
                out_dir,
            ],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let a = fs::read(dir.path().join("a/trace.csv")).unwrap();
    let b = fs::read(dir.path().join("b/trace.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn plots_regenerate_from_the_trace_alone() {
    // Re-running on an untouched trace must reproduce the SVG exactly;
    // the plots carry no information beyond the CSV.
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("demo.toml"), DEMO_CONFIG).unwrap();
    for out_dir in ["a", "b"] {
        let out = run(
            &["run", "--config", "demo.toml", "--out", out_dir],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let svg_a = fs::read(dir.path().join("a/tracking.svg")).unwrap();
    let svg_b = fs::read(dir.path().join("b/tracking.svg")).unwrap();
    assert_eq!(svg_a, svg_b);
    assert!(String::from_utf8_lossy(&svg_a).starts_with("<svg"));
}

#[test]
fn stability_reports_closed_form_roots() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("siso.toml"),
        "rows = 1\ncols = 1\nblocks = [[1.0]]\n",
    )
    .unwrap();
    let out = run(
        &[
            "stability",
            "--pjm",
            "siso.toml",
            "--n",
            "1",
            "--nu",
            "1",
            "--lambda",
            "0.01",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("0.009900990"), "stdout: {text}");
    assert!(text.contains("verdict: stable"));
}

#[test]
fn stability_sweep_emits_csv_with_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("siso.toml"),
        "rows = 1\ncols = 1\nblocks = [[1.0]]\n",
    )
    .unwrap();
    let out = run(
        &[
            "stability",
            "--pjm",
            "siso.toml",
            "--lambda-sweep",
            "-0.6:0.2:0.2",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,max_root_modulus,verdict");
    assert!(lines[1].starts_with("-0.6,") && lines[1].ends_with("unstable"));
    for line in &lines[2..6] {
        assert!(line.ends_with(",stable"), "line: {line}");
    }
}

#[test]
fn stability_two_output_demo_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "stability",
            "--plant",
            "two-output-fir",
            "--n",
            "2",
            "--nu",
            "2",
            "--lambda",
            "0.01",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(stdout(&out).contains("verdict: stable"));
}

#[test]
fn stability_rejects_malformed_sweep() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("siso.toml"),
        "rows = 1\ncols = 1\nblocks = [[1.0]]\n",
    )
    .unwrap();
    let out = run(
        &[
            "stability",
            "--pjm",
            "siso.toml",
            "--lambda-sweep",
            "1:0:-1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_and_validates_arguments() {
    let dir = tempfile::tempdir().unwrap();
    for family in ["mlp", "rbf"] {
        let out = run(
            &[
                "gradcheck",
                "--family",
                family,
                "--trials",
                "100",
                "--seed",
                "5",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "family {family}");
        assert!(stdout(&out).contains("verdict=pass"));
    }
    let out = run(
        &["gradcheck", "--family", "mlp", "--trials", "0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

const TRAIN_CONFIG: &str = r#"
[run]
steps = 900
seed = 0

[plant]
kind = "cubic-two-input"

[controller]
prediction_horizon = 2
control_horizon = 2
pseudo_order = 2
lambda = 0.01

[estimator]
kind = "mlp-offline"
init = "preset-1-1"
eta = 0.5
alpha = 0.05

[estimator.train]
steps = 900
threshold = 1e9
epoch_cap = 100000

[[estimator.train.signals]]
kind = "sinusoid"
amplitude = 0.9
period = 200.0

[[estimator.train.signals]]
kind = "sinusoid"
amplitude = 0.6
period = 200.0

[[reference]]
kind = "sinusoid"
amplitude = 1.0
period = 200.0
shift = 1.0
"#;

#[test]
fn train_with_trivial_threshold_takes_one_epoch() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("train.toml"), TRAIN_CONFIG).unwrap();
    let out = run(
        &["train", "--config", "train.toml", "--out", "t"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("epochs=1 "));

    // The checkpoint reloads into an identical model.
    let loaded =
        mfapc_core::estimators::load_checkpoint(&dir.path().join("t/checkpoint.json")).unwrap();
    match loaded {
        mfapc_core::estimators::ModelCheckpoint::Mlp(net) => {
            assert_eq!(net.input_dim(), 4);
            assert_eq!(net.output_dim(), 1);
        }
        other => panic!("unexpected checkpoint {other:?}"),
    }
}

#[test]
fn train_epoch_cap_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = TRAIN_CONFIG
        .replace("threshold = 1e9", "threshold = 1e-12")
        .replace("epoch_cap = 100000", "epoch_cap = 3");
    fs::write(dir.path().join("train.toml"), config).unwrap();
    let out = run(
        &["train", "--config", "train.toml", "--out", "t"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("non-convergence"));
}
