use std::fs;

use circflow::dynamics::make_bump_ic;
use circflow::io::{parse_timeseries, read_snapshot, sidecar_path, timeseries_csv, write_snapshot};
use circflow::{Bump, Error, FlowParams, GridSpec, Problem, RhsMode, StepControl};

fn short_run() -> (Problem, circflow::Run) {
    let p = Problem::new(GridSpec::default().with_size(32, 32), &FlowParams::default(), RhsMode::Full).unwrap();
    let ic = make_bump_ic(&p.grid, &Bump::default()).unwrap();
    let run = p.evolve(&ic, &StepControl { t_end: 1.0, diag_every: 3, ..StepControl::default() }, &mut ()).unwrap();
    (p, run)
}

#[test]
fn snapshot_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let (p, run) = short_run();
    let path = dir.path().join("s.bin");
    write_snapshot(&path, &p.grid.spec, &p.bg.params, run.t, run.steps, &run.state).unwrap();
    let (meta, state) = read_snapshot(&path, Some(&p.grid.spec)).unwrap();
    assert!(state.bits_eq(&run.state));
    assert_eq!((meta.t, meta.step, meta.shape), (run.t, run.steps, [32, 32]));
    assert_eq!(meta.sha256.len(), 64);
}

#[test]
fn snapshot_corruption_and_grid_mismatch_detected() {
    let dir = tempfile::tempdir().unwrap();
    let (p, run) = short_run();
    let path = dir.path().join("s.bin");
    write_snapshot(&path, &p.grid.spec, &p.bg.params, run.t, run.steps, &run.state).unwrap();

    let other = p.grid.spec.with_size(32, 64);
    let e = read_snapshot(&path, Some(&other)).unwrap_err();
    assert!(matches!(&e, Error::Snapshot(m) if m.contains("grid mismatch")), "{e}");

    let mut bytes = fs::read(&path).unwrap();
    bytes[100] ^= 1;
    fs::write(&path, bytes).unwrap();
    let e = read_snapshot(&path, None).unwrap_err();
    assert!(matches!(&e, Error::Snapshot(m) if m.contains("checksum")), "{e}");

    fs::remove_file(sidecar_path(&path)).unwrap();
    assert!(matches!(read_snapshot(&path, None), Err(Error::Snapshot(_))));
}

#[test]
fn snapshot_shape_checked_on_write() {
    let dir = tempfile::tempdir().unwrap();
    let (p, run) = short_run();
    let wrong = p.grid.spec.with_size(16, 16);
    assert!(write_snapshot(&dir.path().join("s.bin"), &wrong, &p.bg.params, 0.0, 0, &run.state).is_err());
}

#[test]
fn timeseries_csv_round_trip_is_bitwise() {
    let (_, run) = short_run();
    let text = timeseries_csv(&run.series);
    let back = parse_timeseries(&text).unwrap();
    assert_eq!(back.len(), run.series.samples.len());
    // backward differences are absent on the first two rows
    assert!(back[0].report.d_tt.is_none() && back[1].report.d_tt.is_none());
    assert!(back[2].report.d_tt.is_some());
    for (a, b) in back.iter().zip(&run.series.samples) {
        assert_eq!(a, b);
    }
    let mut again = run.series.clone();
    again.samples = back;
    assert_eq!(timeseries_csv(&again), text);
}

#[test]
fn malformed_timeseries_rejected() {
    assert!(parse_timeseries("").is_err());
    assert!(parse_timeseries("step,t\n0,0\n").is_err());
    let (_, run) = short_run();
    let text = timeseries_csv(&run.series);
    let truncated: String = text.lines().take(2).map(|l| format!("{},\n", &l[..l.len() / 2])).collect();
    assert!(parse_timeseries(&truncated).is_err());
}
