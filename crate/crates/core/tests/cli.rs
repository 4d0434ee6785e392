use std::process::Command;

fn circflow(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_circflow")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn config(dir: &std::path::Path, text: &str) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn missing_config_is_usage_error() {
    let (code, _, err) = circflow(&["evolve"]);
    assert_eq!(code, 2);
    assert!(err.contains("--config"));
    assert_eq!(circflow(&["frobnicate"]).0, 2);
    assert_eq!(circflow(&["residual", "--demo", "--threads", "0"]).0, 2);
}

#[test]
fn bad_config_is_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"params": {"gamma": 0.9}}"#);
    let (code, _, err) = circflow(&["residual", "--config", &cfg]);
    assert_eq!(code, 2);
    assert!(err.contains("gamma > 1"), "{err}");
    let cfg = config(dir.path(), r#"{"grid": {"n_r": 16, "bogus": 1}}"#);
    let (code, _, err) = circflow(&["evolve", "--config", &cfg]);
    assert_eq!(code, 2);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn passing_check_exits_zero_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, stdout, _) = circflow(&["steady-check", "--demo", "--threads", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("PASS"));
    let csv = std::fs::read_to_string(out.join("steady_check.csv")).unwrap();
    assert!(csv.starts_with("grid,continuity,r_momentum,theta_momentum"));
}

#[test]
fn unmet_threshold_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"checks": {"min_order": 3.5}}"#);
    let (code, stdout, _) = circflow(&["residual", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stdout.contains("FAIL"));
}

#[test]
fn blow_up_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"{"grid": {"n_r": 24, "n_z": 24},
            "control": {"t_end": 2.0, "cfl_safety": 1.0},
            "ic": {"bump": {"amplitude": 40.0, "mask": {"phi": false}}}}"#,
    );
    let (code, _, err) = circflow(&["evolve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    // the partial series is still flushed
    assert!(dir.path().join("timeseries.csv").exists());
}

#[test]
fn evolve_writes_outputs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"{"grid": {"n_r": 32, "n_z": 32}, "control": {"t_end": 2.0, "diag_every": 5}, "outputs": {"snapshot_every": 5}}"#,
    );
    let out = dir.path().join("run");
    let (code, stdout, err) = circflow(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}{err}");
    for f in ["timeseries.csv", "summary.json", "config.json", "snapshot_00000000.bin", "snapshot_00000010.bin"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let resumed = dir.path().join("resumed");
    let snap = out.join("snapshot_00000010.bin");
    let (code, _, err) = circflow(&["evolve", "--config", &cfg, "--resume", snap.to_str().unwrap(), "--out", resumed.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");

    let bad = config(dir.path(), r#"{"grid": {"n_r": 40, "n_z": 32}, "control": {"t_end": 2.0, "diag_every": 5}}"#);
    let (code, _, err) = circflow(&["evolve", "--config", &bad, "--resume", snap.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
}
