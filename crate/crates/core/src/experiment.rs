//! Run configuration, initial-condition presets and the experiment drivers
//! behind the `bsq` command line: single simulations, the ε-sweep and
//! constant calibration.
//!
//! Configuration files are TOML:
//!
//! ```toml
//! [grid]
//! n = 128
//!
//! [initial]
//! preset = "vortex_pair"      # stratified | shear | vortex_pair | random_seeded
//! seed = 42                   # random_seeded only; "random_seeded(42)" also works
//! eps_theta = 1.0             # θ₀ amplitude
//! eps_u = 1.0                 # ω₀ amplitude
//!
//! [solver]
//! cfl = 0.4
//! dt_max = 0.05
//! stop_time = 50.0
//! filter = "none"             # none | exponential
//! tail_fraction = 1e-3
//! omega_growth = 100.0
//!
//! [diagnostics]
//! r = 2.0
//!
//! [output]
//! dir = "runs"
//! run_id = "vortex_pair"
//! snapshot_stride = 0
//!
//! [sweep]
//! c = 0.35                    # optional; calibrated from the first row when absent
//! ```
//!
//! Only `[grid]` and `[initial]` are required. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{self, lifespan_lower_bound_2d, DiagnosticsRecord, InequalityReport};
use crate::error::{Error, Result};
use crate::random::{self, RandomSpectrum};
use crate::snapshot;
use crate::solver::{
    self, BlowUpThresholds, SolverConfig, SolverState, SpectralFilter, Trajectory, Trigger,
};
use crate::spectral::{Grid, RealField, SpectralField};

// ---------------------------------------------------------------------------
// Configuration

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// `θ₀ = ε_θ sin x₂`, `ω₀ = 0`: hydrostatic rest, steady.
    Stratified,
    /// `θ₀ = ε_θ sin x₂`, `ω₀ = ε_u cos x₂`: stratified shear, steady.
    Shear,
    /// Cellular array of counter-rotating vortices `ω₀ = 2ε_u sin x₁ sin x₂`
    /// with `θ₀ = ε_θ sin x₁ sin x₂` aligned to the streamlines.
    VortexPair,
    /// Seeded random band-limited `θ₀`, `ω₀` normalized to unit `L²` norm.
    RandomSeeded(u64),
}

impl Preset {
    pub fn name(&self) -> String {
        match self {
            Preset::Stratified => "stratified".into(),
            Preset::Shear => "shear".into(),
            Preset::VortexPair => "vortex_pair".into(),
            Preset::RandomSeeded(seed) => format!("random_seeded({seed})"),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "stratified" => return Ok(Preset::Stratified),
            "shear" => return Ok(Preset::Shear),
            "vortex_pair" => return Ok(Preset::VortexPair),
            _ => {}
        }
        if let Some(arg) = s.strip_prefix("random_seeded(").and_then(|r| r.strip_suffix(')')) {
            return arg
                .trim()
                .parse::<u64>()
                .map(Preset::RandomSeeded)
                .map_err(|_| Error::Config(format!("seed in {s:?} is not a 64-bit unsigned integer")));
        }
        Err(Error::Config(format!(
            "unknown preset {s:?}; expected stratified, shear, vortex_pair or random_seeded(<seed>)"
        )))
    }
}

/// Wave-number cap and decay of the random preset.
const RANDOM_KMAX: usize = 8;
const RANDOM_DECAY: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialCondition {
    pub preset: Preset,
    pub eps_theta: f64,
    pub eps_u: f64,
}

impl InitialCondition {
    pub fn new(preset: Preset) -> Self {
        Self {
            preset,
            eps_theta: 1.0,
            eps_u: 1.0,
        }
    }

    pub fn build(&self, grid: Grid) -> Result<SolverState> {
        let (et, eu) = (self.eps_theta, self.eps_u);
        let (theta, omega) = match self.preset {
            Preset::Stratified => (
                physical(grid, |_, y| et * y.sin())?,
                SpectralField::zeros(grid),
            ),
            Preset::Shear => (
                physical(grid, |_, y| et * y.sin())?,
                physical(grid, |_, y| eu * y.cos())?,
            ),
            Preset::VortexPair => (
                physical(grid, |x, y| et * x.sin() * y.sin())?,
                physical(grid, |x, y| 2.0 * eu * x.sin() * y.sin())?,
            ),
            Preset::RandomSeeded(seed) => {
                let spectrum = RandomSpectrum::new(RANDOM_KMAX.min(grid.dealias_cutoff()), RANDOM_DECAY);
                let mut rng = random::rng(seed);
                let omega = random::band_limited(grid, spectrum, &mut rng)?;
                let theta = random::band_limited(grid, spectrum, &mut rng)?;
                (unit_l2(&theta).scale(et), unit_l2(&omega).scale(eu))
            }
        };
        SolverState::new(0.0, theta, omega)
    }
}

fn physical(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<SpectralField> {
    Ok(RealField::from_fn(grid, f)?.to_spectral())
}

fn unit_l2(f: &SpectralField) -> SpectralField {
    let norm = f.l2_norm();
    if norm > 0.0 {
        f.scale(1.0 / norm)
    } else {
        f.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub initial: InitialCondition,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub run_id: String,
    /// Constant `c` of the transport estimates used for sweep bounds.
    pub sweep_c: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: RawGrid,
    initial: RawInitial,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    diagnostics: RawDiagnostics,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    sweep: RawSweep,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    preset: String,
    seed: Option<u64>,
    #[serde(default = "one")]
    eps_theta: f64,
    #[serde(default = "one")]
    eps_u: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    cfl: f64,
    dt_max: f64,
    stop_time: f64,
    filter: String,
    tail_fraction: f64,
    omega_growth: f64,
}

impl Default for RawSolver {
    fn default() -> Self {
        let t = BlowUpThresholds::default();
        Self {
            cfl: 0.4,
            dt_max: 0.05,
            stop_time: 1.0,
            filter: "none".into(),
            tail_fraction: t.tail_fraction,
            omega_growth: t.omega_growth,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawDiagnostics {
    r: f64,
}

impl Default for RawDiagnostics {
    fn default() -> Self {
        Self { r: 2.0 }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    dir: PathBuf,
    run_id: Option<String>,
    snapshot_stride: usize,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
            run_id: None,
            snapshot_stride: 0,
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    c: Option<f64>,
}

impl RunConfig {
    /// Defaults for everything but the grid and preset.
    pub fn new(n: usize, preset: Preset) -> Result<Self> {
        let grid = Grid::new(n)?;
        Ok(Self {
            initial: InitialCondition::new(preset),
            solver: SolverConfig::new(grid, 1.0),
            output_dir: PathBuf::from("runs"),
            run_id: default_run_id(preset),
            sweep_c: None,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        let n = usize::try_from(raw.grid.n)
            .map_err(|_| Error::Config(format!("grid.n must be a positive even integer ≥ 8, got {}", raw.grid.n)))?;
        let grid = Grid::new(n).map_err(|e| Error::Config(format!("grid.n: {e}")))?;

        let preset = match (raw.initial.preset.trim(), raw.initial.seed) {
            ("random_seeded", Some(seed)) => Preset::RandomSeeded(seed),
            ("random_seeded", None) => return Err(Error::Config("random_seeded needs initial.seed".into())),
            (name, None) => name.parse()?,
            (_, Some(_)) => {
                return Err(Error::Config(
                    "initial.seed only applies to preset = \"random_seeded\" without an inline seed".into(),
                ))
            }
        };
        for (key, v) in [("initial.eps_theta", raw.initial.eps_theta), ("initial.eps_u", raw.initial.eps_u)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key} must be a finite nonnegative number, got {v}")));
            }
        }

        let filter = match raw.solver.filter.as_str() {
            "none" => SpectralFilter::None,
            "exponential" => SpectralFilter::exponential(),
            other => {
                return Err(Error::Config(format!(
                    "solver.filter must be \"none\" or \"exponential\", got {other:?}"
                )))
            }
        };
        let solver = SolverConfig {
            grid,
            cfl: raw.solver.cfl,
            dt_max: raw.solver.dt_max,
            filter,
            stop_time: raw.solver.stop_time,
            thresholds: BlowUpThresholds {
                tail_fraction: raw.solver.tail_fraction,
                omega_growth: raw.solver.omega_growth,
            },
            r: raw.diagnostics.r,
            snapshot_stride: raw.output.snapshot_stride,
        };
        solver.validate()?;
        if let Some(c) = raw.sweep.c {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("sweep.c must be finite and nonnegative, got {c}")));
            }
        }
        let run_id = raw.output.run_id.unwrap_or_else(|| default_run_id(preset));
        if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id == "." || run_id == ".." {
            return Err(Error::Config(format!("output.run_id {run_id:?} is not a plain directory name")));
        }
        Ok(Self {
            initial: InitialCondition {
                preset,
                eps_theta: raw.initial.eps_theta,
                eps_u: raw.initial.eps_u,
            },
            solver,
            output_dir: raw.output.dir,
            run_id,
            sweep_c: raw.sweep.c,
        })
    }

    pub fn grid(&self) -> Grid {
        self.solver.grid
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }
}

fn default_run_id(preset: Preset) -> String {
    match preset {
        Preset::RandomSeeded(seed) => format!("random_seeded_{seed}"),
        other => other.name(),
    }
}

// ---------------------------------------------------------------------------
// Single runs

/// Largest deviations of the conserved quantities over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Drifts {
    /// `max_t |‖θ(t)‖₂ − ‖θ₀‖₂| / ‖θ₀‖₂`
    pub theta_l2: f64,
    /// `max_t |⨍θ(t) − ⨍θ₀|`
    pub theta_mean: f64,
    /// `max_t |⨍ω(t)|`
    pub omega_mean: f64,
    /// `|E(T) − E(0) − ∫⨍θu₂| / max(E(0), E(T))` at the final time
    pub energy_balance: f64,
    /// `‖θ(T) − θ₀‖₂ / max(‖θ₀‖₂, 1)`
    pub theta_state: f64,
    /// `‖ω(T) − ω₀‖₂ / max(‖ω₀‖₂, 1)`
    pub omega_state: f64,
}

impl Drifts {
    pub fn of(traj: &Trajectory) -> Self {
        let inv = &traj.invariants;
        let first = inv[0];
        let last = *inv.last().expect("trajectory has invariants");
        let theta_l2 = if first.theta_l2 > 0.0 {
            inv.iter().map(|i| (i.theta_l2 - first.theta_l2).abs()).fold(0.0, f64::max) / first.theta_l2
        } else {
            inv.iter().map(|i| i.theta_l2).fold(0.0, f64::max)
        };
        let t: Vec<f64> = inv.iter().map(|i| i.t).collect();
        let flux: Vec<f64> = inv.iter().map(|i| i.buoyancy_flux).collect();
        let work = simpson(&t, &flux);
        let scale = first.energy.max(last.energy);
        let imbalance = (last.energy - first.energy - work).abs();
        let energy_balance = if scale > 0.0 { imbalance / scale } else { imbalance };
        let (s0, s1) = (traj.initial_state(), traj.final_state());
        Self {
            theta_l2,
            theta_mean: inv.iter().map(|i| (i.theta_mean - first.theta_mean).abs()).fold(0.0, f64::max),
            omega_mean: inv.iter().map(|i| i.omega_mean.abs()).fold(0.0, f64::max),
            energy_balance,
            theta_state: (s1.theta() - s0.theta()).l2_norm() / s0.theta().l2_norm().max(1.0),
            omega_state: (s1.omega() - s0.omega()).l2_norm() / s0.omega().l2_norm().max(1.0),
        }
    }
}

/// `∫ y dt` over nonuniform samples: composite Simpson on interval pairs,
/// with a three-point quadratic rule on a leftover final interval.
pub fn simpson(t: &[f64], y: &[f64]) -> f64 {
    let m = t.len();
    if m < 2 {
        return 0.0;
    }
    if m == 2 {
        return 0.5 * (t[1] - t[0]) * (y[0] + y[1]);
    }
    let pair = |i: usize| {
        let (h0, h1) = (t[i + 1] - t[i], t[i + 2] - t[i + 1]);
        let h = h0 + h1;
        h / 6.0 * ((2.0 - h1 / h0) * y[i] + h * h / (h0 * h1) * y[i + 1] + (2.0 - h0 / h1) * y[i + 2])
    };
    let intervals = m - 1;
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < m {
        total += pair(i);
        i += 2;
    }
    if intervals % 2 == 1 {
        // quadratic through the last three samples, integrated over the last interval
        let (a, b, c) = (m - 3, m - 2, m - 1);
        let (h0, h1) = (t[b] - t[a], t[c] - t[b]);
        total += h1 / 6.0
            * (-(h1 * h1) / (h0 * (h0 + h1)) * y[a]
                + (3.0 + h1 / h0) * y[b]
                + (3.0 * h0 + 2.0 * h1) / (h0 + h1) * y[c]);
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub preset: String,
    pub n: usize,
    pub eps_theta: f64,
    pub eps_u: f64,
    pub filter: SpectralFilter,
    pub final_t: f64,
    pub steps: usize,
    pub trigger: &'static str,
    pub trigger_detail: Trigger,
    #[serde(rename = "Omega0")]
    pub omega0: f64,
    #[serde(rename = "Theta0")]
    pub theta0: f64,
    pub drifts: Drifts,
}

impl RunSummary {
    pub fn of(config: &RunConfig, traj: &Trajectory) -> Self {
        Self {
            run_id: config.run_id.clone(),
            preset: config.initial.preset.name(),
            n: config.grid().n(),
            eps_theta: config.initial.eps_theta,
            eps_u: config.initial.eps_u,
            filter: traj.filter,
            final_t: traj.outcome.t,
            steps: traj.outcome.steps,
            trigger: traj.outcome.trigger.name(),
            trigger_detail: traj.outcome.trigger,
            omega0: traj.records[0].omega,
            theta0: traj.records[0].theta,
            drifts: Drifts::of(traj),
        }
    }
}

/// Build the initial state and integrate it.
pub fn run(config: &RunConfig) -> Result<Trajectory> {
    let initial = config.initial.build(config.grid())?;
    solver::simulate(&initial, &config.solver)
}

pub fn diag_csv_bytes(records: &[DiagnosticsRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    diagnostics::write_diag_csv(&mut buf, records)?;
    Ok(buf)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Write `diag.csv`, `summary.json` and `{theta,omega}_{step:08}.bsqf`
/// snapshots into `dir`.
pub fn write_run_artifacts(dir: &Path, traj: &Trajectory, summary: &RunSummary) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join("diag.csv"), &diag_csv_bytes(&traj.records)?)?;
    for (step, state) in &traj.snapshots {
        snapshot::write(&dir.join(format!("theta_{step:08}.bsqf")), &state.theta().to_physical())?;
        snapshot::write(&dir.join(format!("omega_{step:08}.bsqf")), &state.omega().to_physical())?;
    }
    write_json(&dir.join("summary.json"), summary)
}

/// Run one simulation and write its artifacts under `output_dir/run_id`.
pub fn cmd_simulate(config: &RunConfig) -> Result<RunSummary> {
    let traj = run(config)?;
    let summary = RunSummary::of(config, &traj);
    write_run_artifacts(&config.run_dir(), &traj, &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Calibration

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    /// Empirical constant `c` of the transport estimates.
    #[serde(rename = "C")]
    pub c: f64,
    /// SHA-256 of the calibration run's `diag.csv`.
    pub trajectory_hash: String,
    pub records: usize,
    pub inequalities: Vec<InequalityReport>,
}

pub const MIN_CALIBRATION_RECORDS: usize = 10;

pub fn calibrate_records(records: &[DiagnosticsRecord]) -> Result<Calibration> {
    if records.len() < MIN_CALIBRATION_RECORDS {
        return Err(Error::Precondition(format!(
            "calibration trajectory has {} records, need at least {MIN_CALIBRATION_RECORDS}",
            records.len()
        )));
    }
    let report = diagnostics::transport_bound_check_records(records, 0.0)?;
    Ok(Calibration {
        c: report.calibrated_c,
        trajectory_hash: sha256_hex(&diag_csv_bytes(records)?),
        records: records.len(),
        inequalities: report.inequalities,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run the calibration trajectory, write `diag.csv` and `calibration.json`.
pub fn cmd_calibrate(config: &RunConfig) -> Result<Calibration> {
    let traj = run(config)?;
    let calibration = calibrate_records(&traj.records)?;
    let dir = config.run_dir();
    create_dir(&dir)?;
    write_file(&dir.join("diag.csv"), &diag_csv_bytes(&traj.records)?)?;
    write_json(&dir.join("calibration.json"), &calibration)?;
    Ok(calibration)
}

// ---------------------------------------------------------------------------
// ε-sweep

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    #[serde(rename = "T_num")]
    pub t_num: f64,
    pub trigger: &'static str,
    pub steps: usize,
    #[serde(rename = "Omega0")]
    pub omega0: f64,
    #[serde(rename = "Theta0")]
    pub theta0: f64,
    /// `lifespan_lower_bound_2d(Ω₀, Θ₀, 2c)`; absent when `Θ₀ = 0` or `c = 0`.
    #[serde(rename = "T_bound")]
    pub t_bound: Option<f64>,
}

/// Least-squares fit `T_num ≈ a + b·log log(1/ε)` over rows with `ε < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLogFit {
    pub a: f64,
    pub b: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    /// Constant `c` of the transport estimates; bounds use `C = 2c`.
    pub c: f64,
    pub c_source: &'static str,
    pub rows: Vec<SweepRow>,
    /// `T_num` nondecreasing as `ε` decreases.
    pub monotone: bool,
    pub fit: Option<LogLogFit>,
}

pub const SWEEP_COLUMNS: [&str; 7] = ["eps", "T_num", "trigger", "steps", "Omega0", "Theta0", "T_bound"];

impl SweepResult {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SWEEP_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                format!("{:e}", r.eps),
                format!("{:e}", r.t_num),
                r.trigger.to_string(),
                r.steps.to_string(),
                format!("{:e}", r.omega0),
                format!("{:e}", r.theta0),
                r.t_bound.map(|b| format!("{b:e}")).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// The bound reported for a sweep row, with `c` the transport constant.
pub fn sweep_bound(omega0: f64, theta0: f64, c: f64) -> Option<f64> {
    lifespan_lower_bound_2d(omega0, theta0, 2.0 * c).ok().map(|b| b.bound)
}

pub fn validate_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.is_empty() {
        return Err(Error::Config("the ε list is empty".into()));
    }
    if let Some(bad) = epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Config(format!("ε values must be positive, got {bad}")));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("ε values must be strictly decreasing".into()));
    }
    Ok(())
}

/// Run the sweep: each row scales `θ₀` by `ε` with `ω₀` fixed. Rows run on a
/// pool of `threads` workers (all cores when `None`) and are merged in `ε`
/// order. Per-row diagnostics land in `run_dir/eps_<i>/`.
pub fn cmd_sweep(config: &RunConfig, epsilons: &[f64], threads: Option<usize>) -> Result<SweepResult> {
    validate_epsilons(epsilons)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
    let dir = config.run_dir();
    create_dir(&dir)?;

    let runs: Vec<Result<(SweepRow, Vec<DiagnosticsRecord>)>> = pool.install(|| {
        epsilons
            .par_iter()
            .enumerate()
            .map(|(i, &eps)| {
                let mut row_config = config.clone();
                row_config.initial.eps_theta = config.initial.eps_theta * eps;
                row_config.run_id = format!("eps_{i:02}");
                row_config.output_dir = dir.clone();
                row_config.solver.snapshot_stride = 0;
                let traj = run(&row_config)?;
                let row_dir = row_config.run_dir();
                create_dir(&row_dir)?;
                write_file(&row_dir.join("diag.csv"), &diag_csv_bytes(&traj.records)?)?;
                write_json(&row_dir.join("summary.json"), &RunSummary::of(&row_config, &traj))?;
                let r0 = traj.records[0];
                Ok((
                    SweepRow {
                        eps,
                        t_num: traj.lifespan(),
                        trigger: traj.outcome.trigger.name(),
                        steps: traj.outcome.steps,
                        omega0: r0.omega,
                        theta0: r0.theta,
                        t_bound: None,
                    },
                    traj.records,
                ))
            })
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let (c, c_source) = match config.sweep_c {
        Some(c) => (c, "config"),
        None => (calibrate_records(&runs[0].1)?.c, "first_row"),
    };
    let rows: Vec<SweepRow> = runs
        .into_iter()
        .map(|(mut row, _)| {
            row.t_bound = sweep_bound(row.omega0, row.theta0, c);
            row
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].t_num >= w[0].t_num);
    let result = SweepResult {
        c,
        c_source,
        fit: log_log_fit(&rows),
        rows,
        monotone,
    };
    let mut csv_bytes = Vec::new();
    result.write_csv(&mut csv_bytes)?;
    write_file(&dir.join("sweep.csv"), &csv_bytes)?;
    write_json(&dir.join("sweep.json"), &result)?;
    Ok(result)
}

fn log_log_fit(rows: &[SweepRow]) -> Option<LogLogFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.eps < 1.0)
        .map(|r| ((1.0 / r.eps).ln().ln(), r.t_num))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let b = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    Some(LogLogFit {
        a: my - b * mx,
        b,
        points: pts.len(),
    })
}
