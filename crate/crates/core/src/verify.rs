//! Invariant suites behind `bsq verify`, plus the random ensembles they share
//! with the acceptance tests.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::bony::{self, Quantiles, VerificationReport};
use crate::diagnostics::{self, lifespan_lower_bound_2d};
use crate::error::{Error, Result};
use crate::littlewood_paley::{self as lp, BesovIndex, CutoffProfile};
use crate::random::{self, RandomSpectrum};
use crate::solver::{self, SolverConfig, SolverState, StepOptions};
use crate::spectral::{relative_l2_error, Axis, Grid, RealField, SpectralField, Velocity};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Lp,
    Bony,
    Solver,
    Diagnostics,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["lp", "bony", "solver", "diagnostics", "all"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" => Ok(Suite::Lp),
            "bony" => Ok(Suite::Bony),
            "solver" => Ok(Suite::Solver),
            "diagnostics" => Ok(Suite::Diagnostics),
            "all" => Ok(Suite::All),
            other => Err(Error::Config(format!(
                "unknown suite {other:?}; expected one of {}",
                Suite::NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Suite::Lp => "lp",
            Suite::Bony => "bony",
            Suite::Solver => "solver",
            Suite::Diagnostics => "diagnostics",
            Suite::All => "all",
        };
        f.write_str(name)
    }
}

/// One invariant: `value ≤ tolerance` passes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn at_most(suite: &'static str, name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            suite,
            name,
            passed: value <= tolerance,
            value,
            tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

pub fn run_suite(suite: Suite) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Lp => lp_checks()?,
        Suite::Bony => bony_checks()?,
        Suite::Solver => solver_checks()?,
        Suite::Diagnostics => diagnostics_checks()?,
        Suite::All => {
            let mut all = lp_checks()?;
            all.extend(bony_checks()?);
            all.extend(solver_checks()?);
            all.extend(diagnostics_checks()?);
            all
        }
    };
    Ok(SuiteReport {
        suite: suite.to_string(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

// ---------------------------------------------------------------------------
// Ensembles

/// Random band-limited scalar field; the draw is resolution independent.
pub fn random_scalar(grid: Grid, kmax: usize, decay: f64, seed: u64) -> Result<SpectralField> {
    random::band_limited(grid, RandomSpectrum::new(kmax, decay).with_mean(), &mut random::rng(seed))
}

/// Random `(u, ω)` pair: solenoidal `u` and an independent `ω`.
pub fn random_pair(grid: Grid, kmax: usize, decay: f64, seed: u64) -> Result<(Velocity, SpectralField)> {
    let mut rng = random::rng(seed);
    let (u, _) = random::solenoidal(grid, RandomSpectrum::new(kmax, decay), &mut rng)?;
    let w = random::band_limited(grid, RandomSpectrum::new(kmax, decay), &mut rng)?;
    Ok((u, w))
}

/// Max over `fields` of `‖f − Σ_j Δ_j f‖₂ / ‖f‖₂`.
pub fn reconstruction_residual(fields: &[SpectralField]) -> f64 {
    fields
        .iter()
        .map(|f| relative_l2_error(&lp::decompose(f).reconstruct(), f))
        .fold(0.0, f64::max)
}

/// Max over the grid's wave vectors of `|Σ_j Δ̂_j(k) − 1|`.
pub fn partition_of_unity_defect(grid: Grid) -> f64 {
    let profile = CutoffProfile;
    let jm = lp::j_max(grid);
    grid.modes()
        .map(|(_, k1, k2)| {
            let r = ((k1 * k1 + k2 * k2) as f64).sqrt();
            ((-1..=jm).map(|j| profile.block_symbol(j, r)).sum::<f64>() - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Max of `‖∇Δ_j f‖₂ / (2^j·(8/3)·‖Δ_j f‖₂)` over blocks `j ≥ 0`.
pub fn bernstein_ratio(fields: &[SpectralField]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in fields {
        for (j, b) in lp::decompose(f).iter().filter(|(j, _)| *j >= 0) {
            let bl2 = b.l2_norm();
            if bl2 == 0.0 {
                continue;
            }
            let grad = (b.derivative(Axis::X1).l2_norm().powi(2) + b.derivative(Axis::X2).l2_norm().powi(2)).sqrt();
            worst = worst.max(grad / (2f64.powi(j) * lp::OUTER_RADIUS * 2.0 * bl2));
        }
    }
    Ok(worst)
}

/// Relative Bony residual `‖T_f g + T_g f + R(f,g) − P(fg)‖ / ‖P(fg)‖` for
/// `count` seeded random pairs.
pub fn bony_residuals(grid: Grid, count: usize, seed: u64) -> Result<Vec<f64>> {
    let k = grid.dealias_cutoff();
    (0..count as u64)
        .map(|i| {
            let f = random_scalar(grid, k, 0.5, seed.wrapping_add(2 * i))?;
            let g = random_scalar(grid, k, 0.5, seed.wrapping_add(2 * i + 1))?;
            let split = bony::bony_split(&f, &g)?;
            Ok(relative_l2_error(&split.sum(), &bony::dealiased_product(&f, &g)?))
        })
        .collect()
}

/// Max relative residual of the six-term split against the direct commutator
/// over `js` for `count` seeded random pairs.
pub fn six_term_residuals(grid: Grid, js: &[i32], count: usize, seed: u64) -> Result<Vec<f64>> {
    let k = grid.dealias_cutoff();
    (0..count as u64)
        .map(|i| {
            let (u, w) = random_pair(grid, k, 1.0, seed.wrapping_add(i))?;
            let mut worst: f64 = 0.0;
            for &j in js {
                let direct = bony::commutator(&u, j, &w)?;
                let split = bony::six_term_decomposition(&u, j, &w)?;
                worst = worst.max(relative_l2_error(&split.sum(), &direct));
            }
            Ok(worst)
        })
        .collect()
}

/// Commutator-estimate ratios over a seeded ensemble drawn with wave numbers
/// up to `kmax` (use the same `kmax` at every resolution for comparisons).
pub fn commutator_ensemble(grid: Grid, kmax: usize, count: usize, seed: u64, idx: BesovIndex) -> Result<VerificationReport> {
    let ratios = (0..count as u64)
        .map(|i| {
            let (u, w) = random_pair(grid, kmax, 1.0, seed.wrapping_add(i))?;
            bony::commutator_ratio(&u, &w, idx)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(VerificationReport {
        test: "commutator_ratio".into(),
        n: grid.n(),
        ensemble_size: count,
        max_ratio: ratios.iter().copied().reduce(f64::max),
        residuals: Quantiles::of(&ratios),
    })
}

/// Seeded zero-mean vorticity fields up to wave number `kmax`.
pub fn vorticity_ensemble(grid: Grid, kmax: usize, count: usize, seed: u64) -> Result<Vec<SpectralField>> {
    (0..count as u64)
        .map(|i| random::band_limited(grid, RandomSpectrum::new(kmax, 1.0), &mut random::rng(seed.wrapping_add(i))))
        .collect()
}

// ---------------------------------------------------------------------------
// Suites

fn lp_checks() -> Result<Vec<Check>> {
    let g = Grid::new(64)?;
    let fields = (0..20)
        .map(|i| random_scalar(g, g.dealias_cutoff(), 0.5, 100 + i))
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![
        Check::at_most("lp", "partition_of_unity", partition_of_unity_defect(g), 1e-14),
        Check::at_most("lp", "reconstruction", reconstruction_residual(&fields), 1e-12),
        Check::at_most("lp", "bernstein_l2", bernstein_ratio(&fields)?, 1.0 + 1e-12),
    ])
}

fn bony_checks() -> Result<Vec<Check>> {
    let g = Grid::new(64)?;
    let bony_max = bony_residuals(g, 10, 200)?.into_iter().fold(0.0, f64::max);
    let six_max = six_term_residuals(g, &[1, 2, 3, 4, 5], 5, 300)?
        .into_iter()
        .fold(0.0, f64::max);
    // R(f, g) = R(g, f) bit for bit
    let f = random_scalar(g, 21, 0.5, 400)?;
    let h = random_scalar(g, 21, 0.5, 401)?;
    let asym = (&bony::remainder(&f, &h)? - &bony::remainder(&h, &f)?).l2_norm();
    Ok(vec![
        Check::at_most("bony", "bony_identity", bony_max, 1e-11),
        Check::at_most("bony", "six_term_split", six_max, 1e-10),
        Check::at_most("bony", "remainder_symmetry", asym, 0.0),
    ])
}

/// `‖θ(T) − θ₀‖ + ‖ω(T) − ω₀‖` after integrating to `stop_time`.
pub fn steady_drift(state: &SolverState, stop_time: f64) -> Result<f64> {
    let traj = solver::simulate(state, &SolverConfig::new(state.grid(), stop_time))?;
    let end = traj.final_state();
    Ok((end.theta() - state.theta()).l2_norm() + (end.omega() - state.omega()).l2_norm())
}

/// Relative mismatch between the scaled evolution of `state` and the
/// evolution of the scaled state, both stepped with the scaled dt sequence.
pub fn scaling_mismatch(state: &SolverState, eps: f64, horizon: f64, steps: usize) -> Result<f64> {
    let opts = StepOptions {
        force: true,
        ..StepOptions::default()
    };
    let dt = horizon / steps as f64;
    let mut a = state.clone();
    let mut b = solver::apply_scaling(state, eps)?;
    for _ in 0..steps {
        a = solver::time_step(&a, dt, &opts)?;
        b = solver::time_step(&b, dt / eps, &opts)?;
    }
    let a = solver::apply_scaling(&a, eps)?;
    Ok(relative_l2_error(a.theta(), b.theta()).max(relative_l2_error(a.omega(), b.omega())))
}

fn field(g: Grid, f: impl Fn(f64, f64) -> f64) -> Result<SpectralField> {
    Ok(RealField::from_fn(g, f)?.to_spectral())
}

fn solver_checks() -> Result<Vec<Check>> {
    let g = Grid::new(32)?;
    let stratified = SolverState::new(0.0, field(g, |_, y| y.sin())?, SpectralField::zeros(g))?;
    let shear = SolverState::new(0.0, field(g, |_, y| y.sin())?, field(g, |_, y| y.cos())?)?;
    let generic = SolverState::new(
        0.0,
        field(g, |x, y| 0.3 * (x + 2.0 * y).sin() + 0.2)?,
        field(g, |x, y| x.sin() * y.sin() + 0.4 * (2.0 * x - y).cos())?,
    )?;
    let traj = solver::simulate(&generic, &SolverConfig::new(g, 0.5))?;
    let inv = &traj.invariants;
    let mean_drift = inv.iter().map(|i| (i.theta_mean - inv[0].theta_mean).abs()).fold(0.0, f64::max);
    let l2_drift = inv
        .iter()
        .map(|i| (i.theta_l2 - inv[0].theta_l2).abs() / inv[0].theta_l2)
        .fold(0.0, f64::max);
    let pressure = solver::recover_pressure(&generic)?;
    Ok(vec![
        Check::at_most("solver", "stratified_steady", steady_drift(&stratified, 1.0)?, 1e-8),
        Check::at_most("solver", "shear_steady", steady_drift(&shear, 1.0)?, 1e-8),
        Check::at_most("solver", "theta_mean_conserved", mean_drift, 1e-13),
        Check::at_most("solver", "theta_l2_conserved", l2_drift, 1e-6),
        Check::at_most("solver", "scaling_symmetry", scaling_mismatch(&generic, 0.5, 0.25, 25)?, 1e-6),
        Check::at_most("solver", "pressure_residual", solver::pressure_residual(&generic, &pressure)?, 1e-10),
    ])
}

/// Max over random `(Ω₀, Θ₀, C, λ)` of the relative defect in
/// `bound(Ω₀, Θ₀) = λ·bound(λΩ₀, λ²Θ₀)`.
pub fn lambda_scaling_defect(points: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    let mut rng = random::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let mut draw = |lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..hi));
        let (omega0, theta0, c, lambda) = (draw(-2.0, 2.0), draw(-3.0, 3.0), draw(-2.0, 1.0), draw(-1.5, 1.5));
        let lhs = lifespan_lower_bound_2d(omega0, theta0, c)?.bound;
        let rhs = lambda * lifespan_lower_bound_2d(lambda * omega0, lambda * lambda * theta0, c)?.bound;
        worst = worst.max(((lhs - rhs) / lhs).abs());
    }
    Ok(worst)
}

fn diagnostics_checks() -> Result<Vec<Check>> {
    let anchor = lifespan_lower_bound_2d(1.0, 1.0, 1.0)?.bound;
    let g = Grid::new(32)?;
    let state = SolverState::new(
        0.0,
        field(g, |x, y| 0.05 * x.sin() * y.sin())?,
        field(g, |x, y| 2.0 * x.sin() * y.sin() + 0.1 * (x + y).cos())?,
    )?;
    let traj = solver::simulate(&state, &SolverConfig::new(g, 1.0))?;
    let ordering = traj.records.iter().map(|r| (r.i3 - r.i2).max(0.0)).fold(0.0, f64::max);
    let transport = diagnostics::transport_bound_check(&traj, 0.0)?;
    let calibrated = diagnostics::bootstrap_check(&traj, transport.calibrated_c)?;
    let shear = SolverState::new(0.0, SpectralField::zeros(g), field(g, |_, y| y.cos())?)?;
    let shear_c = diagnostics::transport_bound_check(&solver::simulate(&shear, &SolverConfig::new(g, 0.5))?, 0.0)?;
    let x_defect = (0..=500)
        .map(|i| {
            let x = 5.0 * i as f64 / 500.0;
            (x - x.exp_m1()).max(x.exp_m1() - x.exp_m1().exp_m1()).max(0.0)
        })
        .fold(0.0, f64::max);
    Ok(vec![
        Check::at_most(
            "diagnostics",
            "lifespan_anchor",
            (anchor - (0.5 * std::f64::consts::LN_2).ln_1p()).abs(),
            1e-12,
        ),
        Check::at_most("diagnostics", "lambda_scaling", lambda_scaling_defect(100, 500)?, 1e-12),
        Check::at_most("diagnostics", "bootstrap_variable_inequality", x_defect, 0.0),
        Check::at_most("diagnostics", "integral_ordering", ordering, 0.0),
        Check::at_most("diagnostics", "shear_minimal_c", shear_c.calibrated_c, 1e-6),
        Check::at_most(
            "diagnostics",
            "bootstrap_envelope_violation",
            (-calibrated.report.margin).max(0.0),
            0.0,
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().to_string(), name);
        }
        assert!("unknown".parse::<Suite>().is_err());
    }

    #[test]
    fn every_suite_passes() {
        for suite in [Suite::Lp, Suite::Bony, Suite::Solver, Suite::Diagnostics] {
            let report = run_suite(suite).unwrap();
            assert!(report.passed, "{report:#?}");
        }
    }

    #[test]
    fn scaling_of_a_steady_state_is_exact() {
        let g = Grid::new(16).unwrap();
        let s = SolverState::new(0.0, SpectralField::zeros(g), field(g, |_, y| y.cos()).unwrap()).unwrap();
        assert!(scaling_mismatch(&s, 0.5, 0.1, 4).unwrap() < 1e-14);
    }
}
