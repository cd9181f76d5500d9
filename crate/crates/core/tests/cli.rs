use std::process::Command;

use tavis::harness::read_csv;

fn tavis() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tavis"))
}

#[test]
fn evolve_writes_a_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let status = tavis()
        .args([
            "evolve", "--gamma", "0.4", "--nbar", "1", "--tmax", "5", "--steps", "50", "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let surface = read_csv(&out).unwrap();
    assert_eq!(surface.axis_values, vec![1.0]);
    assert_eq!(surface.times.len(), 51);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "gamma = 0.0\ninitial = eg\ntmax = 3\nsteps = 6\naxis = gamma\nmin = 0\nmax = 1\ncount = 3\n",
    )
    .unwrap();
    let out = dir.path().join("sweep.csv");
    let status = tavis()
        .args(["sweep", "--count", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let surface = read_csv(&out).unwrap();
    assert_eq!(surface.axis_values, vec![0.0, 1.0]);
    assert!(surface.provenance.iter().any(|(k, v)| k == "initial" && v == "eg"));
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| tavis().args(args).output().unwrap().status.code();
    assert_eq!(code(&["evolve", "--mode", "open"]), Some(2));
    assert_eq!(code(&["evolve", "--initial", "xx"]), Some(2));
    assert_eq!(code(&["figure", "fig7"]), Some(2));
    assert_eq!(code(&["evolve", "--nbar", "3", "--cutoff", "5"]), Some(2));
    assert_eq!(code(&["bogus"]), Some(2));
    assert_eq!(code(&["evolve", "--config", "/nonexistent/run.cfg"]), Some(3));
    assert_eq!(
        code(&[
            "evolve",
            "--tmax",
            "1",
            "--steps",
            "1",
            "--out",
            "/nonexistent/dir/x.csv"
        ]),
        Some(3)
    );
}

#[test]
fn check_runs_selected_criteria() {
    let output = tavis()
        .args(["check", "--criterion", "10", "--criterion", "2"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("[PASS] criterion 10"));
    assert!(lines[1].starts_with("[PASS] criterion  2"));
}

#[test]
fn oversized_step_is_a_usage_error() {
    let output = tavis()
        .args([
            "evolve", "--mode", "open", "--kappa", "0.4", "--nbar", "1", "--step", "0.05", "--tmax", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8(output.stderr).unwrap();
    assert!(err.contains("stability bound"), "{err}");
}
