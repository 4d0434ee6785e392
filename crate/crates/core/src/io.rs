//! Run configuration, CSV time series and bit-exact field snapshots.
//!
//! Every file is written to a temporary sibling and renamed into place, so an
//! interrupted run never leaves a torn output behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::background::FlowParams;
use crate::diagnostics::{EnergyReport, Integrals, Sample, TimeSeries};
use crate::dynamics::{Bump, RhsMode, State};
use crate::error::{Error, Result};
use crate::mms::{ForcingKind, ManufacturedCase};
use crate::operators::{Field, Grid, GridSpec};
use crate::timestepper::StepControl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Evolve,
    SteadyCheck,
    Sweep,
    Convergence,
    Residual,
}

/// `"zero"` or `{"bump": {...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    Bump(Bump),
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Bump(Bump::default())
    }
}

impl InitialCondition {
    pub fn build(&self, grid: &Grid) -> Result<State> {
        match self {
            InitialCondition::Zero => Ok(State::zeros(grid)),
            InitialCondition::Bump(b) => crate::dynamics::make_bump_ic(grid, b),
        }
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            InitialCondition::Zero => 0.0,
            InitialCondition::Bump(b) => b.amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub dir: PathBuf,
    /// steps between snapshots; 0 disables them (must be a multiple of `diag_every`)
    pub snapshot_every: usize,
    /// contamination flag: boundary monitor above this fraction of the
    /// initial maximum amplitude
    pub contamination_threshold: f64,
    /// monitor band width in nodes; `None` picks `min(n_r, n_z) / 16`
    pub monitor_margin: Option<usize>,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { dir: PathBuf::from("out"), snapshot_every: 0, contamination_threshold: 1e-3, monitor_margin: None }
    }
}

/// Refinement-ladder checks (steady residual and formulation equivalence).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    pub ladder: Vec<usize>,
    /// smooth perturbation used by the equivalence check
    pub perturbation: Bump,
    /// minimum observed order
    pub min_order: f64,
    /// absolute bound for the continuity and swirl residuals
    pub exact_tol: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            ladder: vec![64, 128, 256],
            perturbation: Bump { amplitude: 1e-2, center: [11.0, 0.0], widths: [2.0, 2.0], ..Bump::default() },
            min_order: 1.8,
            exact_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub case: ManufacturedCase,
    pub ladder: Vec<usize>,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub forcing: ForcingKind,
    pub min_slope: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            case: ManufacturedCase::default(),
            ladder: vec![32, 64, 128],
            t_end: 0.5,
            cfl_safety: 0.4,
            forcing: ForcingKind::Analytic,
            min_slope: 1.85,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    /// allowed relative spread of `N(T) / eps^2`
    pub n_spread: f64,
    /// allowed max/min factor of the bound constant
    pub ratio_factor: f64,
    /// allowed max/min factor of `|int A_i| / N^(3/2)`
    pub a_factor: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { epsilons: vec![1e-2, 1e-3, 1e-4], n_spread: 0.15, ratio_factor: 1.5, a_factor: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: RunMode,
    pub params: FlowParams,
    pub grid: GridSpec,
    pub control: StepControl,
    pub ic: InitialCondition,
    pub rhs: RhsMode,
    pub outputs: Outputs,
    pub checks: LadderConfig,
    pub convergence: ConvergenceConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.params.validate().map_err(cfg)?;
        self.grid.validate().map_err(cfg)?;
        self.control.validate().map_err(cfg)?;
        self.convergence.case.validate().map_err(cfg)?;
        if let InitialCondition::Bump(b) = &self.ic {
            b.validate(&Grid::new(self.grid.clone()).map_err(cfg)?).map_err(cfg)?;
        }
        let o = &self.outputs;
        if o.snapshot_every % self.control.diag_every != 0 {
            return Err(Error::Config(format!(
                "outputs.snapshot_every ({}) must be a multiple of control.diag_every ({})",
                o.snapshot_every, self.control.diag_every
            )));
        }
        if !(o.contamination_threshold > 0.0) {
            return Err(Error::Config("outputs.contamination_threshold > 0".into()));
        }
        if let Some(m) = o.monitor_margin {
            let limit = self.grid.n_r.min(self.grid.n_z) / 4;
            if m == 0 || m >= limit {
                return Err(Error::Config(format!("outputs.monitor_margin in 1..{limit} (got {m})")));
            }
        }
        if self.sweep.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("sweep.epsilons must be positive".into()));
        }
        Ok(())
    }

    pub fn monitor_margin(&self) -> usize {
        self.outputs.monitor_margin.unwrap_or((self.grid.n_r.min(self.grid.n_z) / 16).max(1))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Strict parse: unknown keys and violated invariants are errors.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Write `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn timeseries_header() -> Vec<&'static str> {
    let mut h = vec!["step", "t", "dt"];
    h.extend_from_slice(&EnergyReport::COLUMNS);
    h.extend_from_slice(&Integrals::COLUMNS);
    h.push("monitor");
    h
}

pub fn timeseries_csv(series: &TimeSeries) -> String {
    let mut out = timeseries_header().join(",");
    out.push('\n');
    for s in &series.samples {
        let mut row = vec![s.step.to_string(), fmt_f64(s.t), fmt_f64(s.dt)];
        row.extend(s.report.values().into_iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
        row.extend(s.integrals.values().into_iter().map(fmt_f64));
        row.push(fmt_f64(s.monitor));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_timeseries(series: &TimeSeries, path: &Path) -> Result<()> {
    write_atomic(path, timeseries_csv(series).as_bytes())
}

pub fn parse_timeseries(text: &str) -> Result<Vec<Sample>> {
    let bad = |m: String| Error::Io(format!("timeseries csv: {m}"));
    let header = timeseries_header();
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| bad("empty file".into()))?;
    if first.split(',').collect::<Vec<_>>() != header {
        return Err(bad("unexpected header".into()));
    }
    let nrep = EnergyReport::COLUMNS.len();
    let nint = Integrals::COLUMNS.len();
    let mut samples = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != header.len() {
            return Err(bad(format!("row {} has {} columns", k + 1, cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("row {}: `{s}` is not a number", k + 1)));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let step = cols[0].parse::<usize>().map_err(|_| bad(format!("row {}: step `{}`", k + 1, cols[0])))?;
        let rep: Vec<Option<f64>> = cols[3..3 + nrep].iter().map(|s| opt(s)).collect::<Result<_>>()?;
        let ints: Vec<f64> = cols[3 + nrep..3 + nrep + nint].iter().map(|s| num(s)).collect::<Result<_>>()?;
        samples.push(Sample {
            step,
            t: num(cols[1])?,
            dt: num(cols[2])?,
            report: EnergyReport::from_values(&rep).ok_or_else(|| bad(format!("row {}: missing value", k + 1)))?,
            integrals: Integrals::from_values(&ints).ok_or_else(|| bad(format!("row {}", k + 1)))?,
            monitor: num(cols[3 + nrep + nint])?,
        });
    }
    Ok(samples)
}

pub fn read_timeseries(path: &Path) -> Result<Vec<Sample>> {
    parse_timeseries(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    pub grid: GridSpec,
    pub params: FlowParams,
    pub t: f64,
    pub step: usize,
    /// `[n_r, n_z]`
    pub shape: [usize; 2],
    /// field order in the binary file
    pub fields: Vec<String>,
    /// SHA-256 of the binary file, lowercase hex
    pub sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sidecar path: same basename with a `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Raw little-endian `f64` for `phi, v_r, v_theta, v_z` (row-major, `z`
/// contiguous) plus a JSON sidecar.
pub fn write_snapshot(path: &Path, grid: &GridSpec, params: &FlowParams, t: f64, step: usize, state: &State) -> Result<()> {
    if state.shape() != (grid.n_r, grid.n_z) {
        return Err(Error::ShapeMismatch { expected: (grid.n_r, grid.n_z), got: state.shape() });
    }
    let mut bytes = Vec::with_capacity(4 * 8 * grid.n_r * grid.n_z);
    for f in state.fields() {
        for v in &f.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let meta = SnapshotMeta {
        grid: grid.clone(),
        params: *params,
        t,
        step,
        shape: [grid.n_r, grid.n_z],
        fields: ["phi", "v_r", "v_theta", "v_z"].map(String::from).to_vec(),
        sha256: hex(&Sha256::digest(&bytes)),
    };
    write_atomic(path, &bytes)?;
    write_atomic(&sidecar_path(path), serde_json::to_string_pretty(&meta).expect("meta serializes").as_bytes())
}

/// Load a snapshot, checking the checksum and (if given) the expected grid.
pub fn read_snapshot(path: &Path, expected: Option<&GridSpec>) -> Result<(SnapshotMeta, State)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::Snapshot(format!("{}: {e}", side.display())))?;
    let meta: SnapshotMeta = serde_json::from_str(&text).map_err(|e| Error::Snapshot(format!("{}: {e}", side.display())))?;
    let [nr, nz] = meta.shape;
    if (meta.grid.n_r, meta.grid.n_z) != (nr, nz) {
        return Err(Error::Snapshot(format!("sidecar shape {nr}x{nz} disagrees with its grid")));
    }
    if let Some(g) = expected {
        if g != &meta.grid {
            return Err(Error::Snapshot(format!(
                "grid mismatch: snapshot is {}x{} on [1, {}] x [{}, {}], expected {}x{} on [1, {}] x [{}, {}]",
                meta.grid.n_r, meta.grid.n_z, meta.grid.r_max, meta.grid.z_min, meta.grid.z_max,
                g.n_r, g.n_z, g.r_max, g.z_min, g.z_max
            )));
        }
    }
    let bytes = fs::read(path).map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
    if hex(&Sha256::digest(&bytes)) != meta.sha256 {
        return Err(Error::Snapshot(format!("checksum mismatch for {}", path.display())));
    }
    let n = nr * nz;
    if bytes.len() != 4 * 8 * n {
        return Err(Error::Snapshot(format!("expected {} bytes for {nr}x{nz}, found {}", 32 * n, bytes.len())));
    }
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let field = |k: usize| Field::from_vec(nr, nz, vals[k * n..(k + 1) * n].to_vec());
    let state = State { phi: field(0)?, v_r: field(1)?, v_theta: field(2)?, v_z: field(3)? };
    Ok((meta, state))
}
