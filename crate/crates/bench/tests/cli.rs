use std::path::Path;
use std::process::{Command, Stdio};

use power_gd::cli::cli_run;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("power-gd").chain(args.iter().copied());
    let code = cli_run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const SMALL: &str = r#"
[[experiment]]
function = "v3"
methods = ["nag", "h_nag", "adam_scheduled"]
n_starts = 8
eta_grid = [0.001, 0.01]
t_checkpoints = [50, 200]
seed = 3
curve_stride = 5
contour_resolution = 4
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn orbit_reports_predicted_amplitude() {
    let (code, out, _) = run(&["orbit", "--kappa", "1", "--eta", "1", "--start", "0.7"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["predicted_amplitude"], 0.25);
    assert!(v["amplitude_error"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["orbit_detected"], true);
}

#[test]
fn contour_has_resolution_squared_rows() {
    let (code, out, _) = run(&["contour", "--function", "beale", "--resolution", "2"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "x,y,v");
    assert!(lines[1].starts_with("-4.5000000000000000e0,-4.5000000000000000e0,"));
}

#[test]
fn contour_rejects_non_planar_functions() {
    let (code, _, err) = run(&["contour", "--function", "quadratic", "--resolution", "3"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["trajectory", "--function", "nope", "--method", "gd", "--eta", "0.1", "--start", "0,0"]).0, 1);
    assert_eq!(run(&["trajectory", "--function", "v1", "--method", "sgd", "--eta", "0.1", "--start", "0,0"]).0, 1);
    assert_eq!(run(&["trajectory", "--function", "v1", "--method", "gd", "--eta", "-1", "--start", "0,0"]).0, 1);
    assert_eq!(run(&["trajectory", "--function", "v1", "--method", "gd", "--eta", "0.1", "--start", "0"]).0, 1);
    assert_eq!(run(&["orbit", "--kappa", "1"]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["sweep", "--config", "/nonexistent/config.toml"]).0, 1);
}

#[test]
fn help_and_list_succeed() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("POWER_GD_OUT_DIR"));
    let (code, out, _) = run(&["list"]);
    assert_eq!(code, 0);
    for name in ["v1", "v2", "v3", "v4", "beale", "quadratic", "gd", "nag", "adam", "adam_scheduled", "amsgrad"] {
        assert!(out.contains(name), "{name} missing from list");
    }
}

#[test]
fn trajectory_prints_record_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let (code, out, err) = run(&[
        "trajectory", "--function", "v3", "--method", "h_nag", "--eta", "0.01", "--start", "-1.5,0.5", "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["method"], "h_nag");
    assert_eq!(v["start_point"], serde_json::json!([-1.5, 0.5]));
    let steps = v["steps_used"].as_u64().unwrap();
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("step,theta_1,theta_2,v,grad_norm,h_norm\n"));
    assert_eq!(text.lines().count() as u64, steps + 2);
}

#[test]
fn start_at_minimum_uses_no_steps() {
    let (code, out, _) = run(&["trajectory", "--function", "beale", "--method", "gd", "--eta", "0.1", "--start", "3,0.5"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["termination"], "CONVERGED_VALUE");
    assert_eq!(v["steps_used"], 0);
}

const REPRODUCIBLE: [&str; 5] = ["sweep.csv", "curves.csv", "runs.csv", "starts.csv", "contour.csv"];

#[test]
fn sweep_is_reproducible_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let (code, _, err) = run(&["sweep", "--config", &config, "--out", a.to_str().unwrap(), "--workers", "1", "--quiet"]);
    assert_eq!(code, 0, "{err}");
    let (code, _, err) = run(&["sweep", "--config", &config, "--out", b.to_str().unwrap(), "--workers", "4", "--quiet"]);
    assert_eq!(code, 0, "{err}");
    for name in REPRODUCIBLE {
        let x = std::fs::read(a.join("v3").join(name)).unwrap();
        let y = std::fs::read(b.join("v3").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    let sweep = std::fs::read_to_string(a.join("v3/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next().unwrap(), "method,eta,T,fraction_converged,n_diverged,n_budget");
    assert_eq!(sweep.lines().count(), 1 + 3 * 2 * 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("v3/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn runs_share_start_points_across_cells() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(run(&["sweep", "--config", &config, "--out", out.to_str().unwrap(), "--quiet"]).0, 0);
    let runs = std::fs::read_to_string(out.join("v3/runs.csv")).unwrap();
    let rows: Vec<Vec<&str>> = runs.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 2 * 8);
    for chunk in rows.chunks(8) {
        let indices: Vec<&str> = chunk.iter().map(|r| r[2]).collect();
        assert_eq!(indices, ["0", "1", "2", "3", "4", "5", "6", "7"]);
    }
}

#[test]
fn sweep_filters_and_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("env-out");
    let status = Command::new(env!("CARGO_BIN_EXE_power-gd"))
        .args(["sweep", "--config", &config, "--method", "h_nag", "--quiet"])
        .env("POWER_GD_OUT_DIR", &out)
        .env("POWER_GD_WORKERS", "2")
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    let curves = std::fs::read_to_string(out.join("v3/curves.csv")).unwrap();
    assert!(curves.lines().skip(1).all(|l| l.starts_with("h_nag,")));

    let status = Command::new(env!("CARGO_BIN_EXE_power-gd"))
        .args(["sweep", "--config", &config, "--function", "beale", "--out", out.to_str().unwrap()])
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[[experiment]]\nfunction = \"v3\"\nmethods = [\"nag\"]\nlearning_rate = 1\n");
    let (code, _, err) = run(&["sweep", "--config", &config]);
    assert_eq!(code, 1);
    assert!(err.contains("learning_rate"), "{err}");

    let config = write_config(dir.path(), "[[experiment]]\nfunction = \"v3\"\nmethods = [\"nag\"]\neta_grid = [0.1, -1.0]\n");
    let (code, _, err) = run(&["sweep", "--config", &config]);
    assert_eq!(code, 1);
    assert!(err.contains("eta"), "{err}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_power-gd");
    assert_eq!(Command::new(bin).arg("list").stdout(Stdio::null()).stderr(Stdio::null()).status().unwrap().code(), Some(0));
    assert_eq!(Command::new(bin).args(["contour", "--function", "v9", "--resolution", "3"]).stdout(Stdio::null()).stderr(Stdio::null()).status().unwrap().code(), Some(1));
    let blocked = tempfile::NamedTempFile::new().unwrap();
    let out = blocked.path().join("x.csv");
    let code = Command::new(bin)
        .args(["contour", "--function", "v1", "--resolution", "3", "--out", out.to_str().unwrap()])
        .stderr(Stdio::null())
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));
}

#[test]
fn shipped_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/benchmarks.toml");
    let cfg = power_gd::config::ConfigFile::load(&path).unwrap();
    assert_eq!(cfg.experiments.len(), 6);
    assert!(cfg.experiments[..5].iter().all(|e| e.plan.methods.len() == 7 && e.plan.n_starts == 100));
}
