//! Pseudo-spectral integration of the 2D inviscid Boussinesq system in
//! vorticity form:
//!
//! ```text
//! ∂_t θ + u·∇θ = 0
//! ∂_t ω + u·∇ω = ∂₁θ,      u = ∇^⊥ Δ⁻¹ ω
//! ```
//!
//! Time stepping is classical RK4 with a CFL-limited step. Nonlinear terms are
//! 2/3-dealiased. The velocity is always rebuilt from `ω`, so `div u = 0`
//! holds to rounding.

use std::fmt;

use serde::Serialize;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::spectral::{
    self, advect, velocity_from_vorticity, Axis, Grid, RealField, SpectralField, Velocity,
};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    t: f64,
    theta: SpectralField,
    omega: SpectralField,
}

impl SolverState {
    /// Both fields are truncated to the dealiasing cutoff; `ω` must have zero mean.
    pub fn new(t: f64, theta: SpectralField, omega: SpectralField) -> Result<Self> {
        theta.grid().ensure_same(&omega.grid())?;
        if !t.is_finite() {
            return Err(Error::Domain { what: "time", value: t });
        }
        let mean = omega.mean();
        if mean.abs() > spectral::MEAN_TOLERANCE {
            return Err(Error::NonzeroMean { mean });
        }
        Ok(Self {
            t,
            theta: theta.dealias(),
            omega: omega.dealias(),
        })
    }

    pub fn from_physical(t: f64, theta: &RealField, omega: &RealField) -> Result<Self> {
        let (theta, omega) = spectral::to_spectral_pair(theta, omega)?;
        Self::new(t, theta, omega)
    }

    #[inline]
    pub fn t(&self) -> f64 {
        self.t
    }

    #[inline]
    pub fn theta(&self) -> &SpectralField {
        &self.theta
    }

    #[inline]
    pub fn omega(&self) -> &SpectralField {
        &self.omega
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.theta.grid()
    }

    pub fn velocity(&self) -> Result<Velocity> {
        velocity_from_vorticity(&self.omega)
    }

    fn is_finite(&self) -> bool {
        self.theta
            .coeffs()
            .iter()
            .chain(self.omega.coeffs())
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `½‖u‖²_{L²}` under the normalized measure.
    pub fn kinetic_energy(&self) -> Result<f64> {
        let u = self.velocity()?;
        Ok(0.5 * (u.u1.l2_norm().powi(2) + u.u2.l2_norm().powi(2)))
    }

    /// Buoyancy flux `⨍ θ u₂`, the rate of change of kinetic energy.
    pub fn buoyancy_flux(&self) -> Result<f64> {
        let u = self.velocity()?;
        // Parseval: ⨍ f g = Σ_k f̂(k) conj(ĝ(k)) for real f, g.
        Ok(self
            .theta
            .coeffs()
            .iter()
            .zip(u.u2.coeffs())
            .map(|(a, b)| (a * b.conj()).re)
            .sum())
    }
}

/// Optional high-order exponential filter `σ(k) = Π_i exp(−α (|k_i|/k_c)^m)`,
/// applied once per step. Off by default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralFilter {
    #[default]
    None,
    Exponential { order: u32, strength: f64 },
}

impl SpectralFilter {
    pub fn exponential() -> Self {
        SpectralFilter::Exponential {
            order: 36,
            strength: 36.0,
        }
    }

    pub fn apply(&self, f: &SpectralField) -> SpectralField {
        match *self {
            SpectralFilter::None => f.clone(),
            SpectralFilter::Exponential { order, strength } => {
                let kc = f.grid().dealias_cutoff().max(1) as f64;
                let axis = |k: i64| (-strength * (k.abs() as f64 / kc).powi(order as i32)).exp();
                f.apply_multiplier(|k1, k2| axis(k1) * axis(k2))
            }
        }
    }
}

impl fmt::Display for SpectralFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralFilter::None => write!(f, "none"),
            SpectralFilter::Exponential { order, strength } => {
                write!(f, "exponential(order={order}, strength={strength})")
            }
        }
    }
}

/// Operational blow-up proxy: resolution exhaustion or vorticity-norm growth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlowUpThresholds {
    /// Max spectral energy fraction of `θ` or `ω` beyond `k_c/2`.
    pub tail_fraction: f64,
    /// Stop once `Ω(t) ≥ omega_growth · Ω(0)`.
    pub omega_growth: f64,
}

impl Default for BlowUpThresholds {
    fn default() -> Self {
        Self {
            tail_fraction: 1e-3,
            omega_growth: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub grid: Grid,
    pub cfl: f64,
    pub dt_max: f64,
    pub filter: SpectralFilter,
    pub stop_time: f64,
    pub thresholds: BlowUpThresholds,
    /// Lebesgue exponent of the `B⁰_{∞,1} ∩ L^r` diagnostics.
    pub r: f64,
    /// Keep every `snapshot_stride`-th state (0 keeps only the first and last).
    pub snapshot_stride: usize,
}

impl SolverConfig {
    pub fn new(grid: Grid, stop_time: f64) -> Self {
        Self {
            grid,
            cfl: 0.4,
            dt_max: 0.05,
            filter: SpectralFilter::None,
            stop_time,
            thresholds: BlowUpThresholds::default(),
            r: 2.0,
            snapshot_stride: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return bad(format!("dt_max must be positive, got {}", self.dt_max));
        }
        if !(self.stop_time > 0.0 && self.stop_time.is_finite()) {
            return bad(format!("stop_time must be positive, got {}", self.stop_time));
        }
        let tau = self.thresholds.tail_fraction;
        if !(tau > 0.0 && tau < 1.0) {
            return bad(format!("tail_fraction must lie in (0, 1), got {tau}"));
        }
        if !(self.thresholds.omega_growth > 1.0) {
            return bad(format!(
                "omega_growth must exceed 1, got {}",
                self.thresholds.omega_growth
            ));
        }
        if !(self.r > 1.0 && self.r.is_finite()) {
            return bad(format!("r must lie in (1, ∞), got {}", self.r));
        }
        if let SpectralFilter::Exponential { order, strength } = self.filter {
            if order == 0 || !(strength > 0.0) {
                return bad("exponential filter needs order ≥ 1 and strength > 0".into());
            }
        }
        Ok(())
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            cfl: self.cfl,
            filter: self.filter,
            force: false,
        }
    }
}

/// Time derivatives `(∂_t θ, ∂_t ω)`.
pub fn rhs(state: &SolverState) -> Result<(SpectralField, SpectralField)> {
    let u = state.velocity()?;
    tendencies(&u, &state.theta, &state.omega)
}

fn tendencies(u: &Velocity, theta: &SpectralField, omega: &SpectralField) -> Result<(SpectralField, SpectralField)> {
    let (u1, u2) = u.to_physical()?;
    let (t1, t2) = spectral::to_physical_pair(&theta.derivative(Axis::X1), &theta.derivative(Axis::X2))?;
    let (w1, w2) = spectral::to_physical_pair(&omega.derivative(Axis::X1), &omega.derivative(Axis::X2))?;
    let (adv_theta, adv_omega) = spectral::to_spectral_pair(
        &spectral::advect_physical(&u1, &u2, &t1, &t2),
        &spectral::advect_physical(&u1, &u2, &w1, &w2),
    )?;
    let mut d_theta = -&adv_theta.dealias();
    let mut d_omega = &(-&adv_omega.dealias()) + &theta.derivative(Axis::X1);
    // Both means are exactly conserved: u·∇f = div(uf) has no k = 0 component.
    zero_mean(&mut d_theta);
    zero_mean(&mut d_omega);
    Ok((d_theta, d_omega))
}

fn zero_mean(f: &mut SpectralField) {
    let m = f.mean();
    if m != 0.0 {
        let konst = SpectralField::from_modes(f.grid(), &[(0, 0, m.into())]).expect("k = 0 is representable");
        *f = &*f - &konst;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    pub cfl: f64,
    pub filter: SpectralFilter,
    /// Skip the CFL check.
    pub force: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            filter: SpectralFilter::None,
            force: false,
        }
    }
}

/// Largest step allowed by `dt ≤ cfl·Δx / ‖u‖_∞` (infinite for `u = 0`).
pub fn admissible_dt(state: &SolverState, cfl: f64) -> Result<f64> {
    let speed = state.velocity()?.max_speed()?;
    Ok(if speed > 0.0 {
        cfl * state.grid().spacing() / speed
    } else {
        f64::INFINITY
    })
}

fn axpy(base: &SpectralField, dt: f64, d: &SpectralField) -> SpectralField {
    base + &d.scale(dt)
}

/// One classical RK4 step.
pub fn time_step(state: &SolverState, dt: f64, opts: &StepOptions) -> Result<SolverState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain { what: "time step", value: dt });
    }
    if !opts.force {
        let admissible = admissible_dt(state, opts.cfl)?;
        if dt > admissible {
            return Err(Error::CflViolation { dt, admissible });
        }
    }
    let (th0, om0) = (&state.theta, &state.omega);
    let stage = |th: &SpectralField, om: &SpectralField| -> Result<(SpectralField, SpectralField)> {
        tendencies(&velocity_from_vorticity(om)?, th, om)
    };
    let (k1t, k1w) = stage(th0, om0)?;
    let (k2t, k2w) = stage(&axpy(th0, 0.5 * dt, &k1t), &axpy(om0, 0.5 * dt, &k1w))?;
    let (k3t, k3w) = stage(&axpy(th0, 0.5 * dt, &k2t), &axpy(om0, 0.5 * dt, &k2w))?;
    let (k4t, k4w) = stage(&axpy(th0, dt, &k3t), &axpy(om0, dt, &k3w))?;
    let combine = |base: &SpectralField, k1: &SpectralField, k2: &SpectralField, k3: &SpectralField, k4: &SpectralField| {
        let mut incr = k1.clone();
        incr += &k2.scale(2.0);
        incr += &k3.scale(2.0);
        incr += k4;
        base + &incr.scale(dt / 6.0)
    };
    let theta = opts.filter.apply(&combine(th0, &k1t, &k2t, &k3t, &k4t));
    let omega = opts.filter.apply(&combine(om0, &k1w, &k2w, &k3w, &k4w));
    Ok(SolverState {
        t: state.t + dt,
        theta,
        omega,
    })
}

/// The symmetry `(θ, u)(t, x) ↦ (ε²θ, εu)(εt, x)`, acting on a state at time
/// `t` as `(t/ε, ε²θ, εω)`.
pub fn apply_scaling(state: &SolverState, epsilon: f64) -> Result<SolverState> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain {
            what: "scaling parameter ε",
            value: epsilon,
        });
    }
    Ok(SolverState {
        t: state.t / epsilon,
        theta: state.theta.scale(epsilon * epsilon),
        omega: state.omega.scale(epsilon),
    })
}

/// Pressure from `ΔP = ∂₂θ − Σ_{ij} ∂_i u^j ∂_j u^i` with zero mean.
pub fn recover_pressure(state: &SolverState) -> Result<RealField> {
    let u = state.velocity()?;
    let source = pressure_source(&u, &state.theta)?;
    Ok(source.invert_laplacian()?.to_physical())
}

fn pressure_source(u: &Velocity, theta: &SpectralField) -> Result<SpectralField> {
    let [[a11, a12], [a21, a22]] = u.gradient();
    let g = spectral::to_physical_many(&[&a11, &a12, &a21, &a22])?;
    let samples = (0..u.grid().len())
        .map(|i| {
            let (d11, d12, d21, d22) = (g[0].samples()[i], g[1].samples()[i], g[2].samples()[i], g[3].samples()[i]);
            // Σ ∂_i u^j ∂_j u^i with a_{ij} = ∂_j u_i
            d11 * d11 + 2.0 * d12 * d21 + d22 * d22
        })
        .collect();
    let quad = RealField::new(u.grid(), samples)?.to_spectral().dealias();
    let mut source = &theta.derivative(Axis::X2) - &quad;
    zero_mean(&mut source);
    Ok(source)
}

/// Relative residual of `div(−u·∇u − ∇P + θe₂) = 0` for a recovered pressure.
pub fn pressure_residual(state: &SolverState, pressure: &RealField) -> Result<f64> {
    let u = state.velocity()?;
    let p = pressure.to_spectral();
    let adv = Velocity {
        u1: advect(&u, &u.u1)?,
        u2: advect(&u, &u.u2)?,
    };
    let residual = &(&(-&adv.divergence()) - &p.laplacian()) + &state.theta.derivative(Axis::X2);
    let scale = adv.divergence().l2_norm() + p.laplacian().l2_norm() + state.theta.derivative(Axis::X2).l2_norm();
    Ok(if scale == 0.0 {
        residual.l2_norm()
    } else {
        residual.l2_norm() / scale
    })
}

// ---------------------------------------------------------------------------
// Simulation driver

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackedField {
    Theta,
    Omega,
}

/// Why a simulation stopped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Trigger {
    StopTime,
    TailFraction { field: TrackedField, fraction: f64 },
    OmegaGrowth { ratio: f64 },
    NonFinite,
}

impl Trigger {
    pub fn name(&self) -> &'static str {
        match self {
            Trigger::StopTime => "stop_time",
            Trigger::TailFraction {
                field: TrackedField::Theta,
                ..
            } => "tail_fraction_theta",
            Trigger::TailFraction {
                field: TrackedField::Omega,
                ..
            } => "tail_fraction_omega",
            Trigger::OmegaGrowth { .. } => "omega_growth",
            Trigger::NonFinite => "non_finite",
        }
    }

    pub fn is_blow_up_signal(&self) -> bool {
        !matches!(self, Trigger::StopTime)
    }
}

/// Conserved and balance quantities sampled every step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Invariants {
    pub t: f64,
    pub theta_l2: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_mean: f64,
    pub omega_mean: f64,
    pub energy: f64,
    pub buoyancy_flux: f64,
    pub tail_theta: f64,
    pub tail_omega: f64,
}

impl Invariants {
    pub fn of(state: &SolverState) -> Result<Self> {
        let theta = state.theta.to_physical();
        let (min, max) = theta
            .samples()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let threshold = state.grid().dealias_cutoff() / 2;
        Ok(Self {
            t: state.t,
            theta_l2: state.theta.l2_norm(),
            theta_min: min,
            theta_max: max,
            theta_mean: state.theta.mean(),
            omega_mean: state.omega.mean(),
            energy: state.kinetic_energy()?,
            buoyancy_flux: state.buoyancy_flux()?,
            tail_theta: state.theta.tail_fraction(threshold),
            tail_omega: state.omega.tail_fraction(threshold),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub trigger: Trigger,
    /// Time of the last valid state.
    pub t: f64,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub invariants: Vec<Invariants>,
    /// `(step, state)` pairs kept at the snapshot stride, always including the
    /// initial and final states.
    pub snapshots: Vec<(usize, SolverState)>,
    pub outcome: Outcome,
    pub filter: SpectralFilter,
}

impl Trajectory {
    pub fn final_state(&self) -> &SolverState {
        &self.snapshots.last().expect("trajectory keeps the initial state").1
    }

    pub fn initial_state(&self) -> &SolverState {
        &self.snapshots[0].1
    }

    /// Numerical lifespan proxy: trigger time, or the stop time if none fired.
    pub fn lifespan(&self) -> f64 {
        self.outcome.t
    }
}

/// Advance `initial` until `config.stop_time` or a blow-up trigger fires.
pub fn simulate(initial: &SolverState, config: &SolverConfig) -> Result<Trajectory> {
    simulate_with(initial, config, |_, _| {})
}

/// [`simulate`] with a callback invoked after every recorded step.
pub fn simulate_with(
    initial: &SolverState,
    config: &SolverConfig,
    mut observe: impl FnMut(usize, &DiagnosticsRecord),
) -> Result<Trajectory> {
    config.validate()?;
    config.grid.ensure_same(&initial.grid())?;
    let opts = config.step_options();
    let thresholds = config.thresholds;

    let mut state = initial.clone();
    let mut step = 0usize;
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let mut invariants = Vec::new();
    let mut snapshots = vec![(0, state.clone())];
    let omega0;

    {
        let rec = diagnostics::record(&state, config.r)?;
        omega0 = rec.omega;
        observe(0, &rec);
        records.push(rec);
        invariants.push(Invariants::of(&state)?);
    }

    let trigger = loop {
        let inv = invariants.last().expect("initial invariants");
        if inv.tail_theta > thresholds.tail_fraction {
            break Trigger::TailFraction {
                field: TrackedField::Theta,
                fraction: inv.tail_theta,
            };
        }
        if inv.tail_omega > thresholds.tail_fraction {
            break Trigger::TailFraction {
                field: TrackedField::Omega,
                fraction: inv.tail_omega,
            };
        }
        let omega_now = records.last().expect("initial record").omega;
        if omega0 > 0.0 && omega_now >= thresholds.omega_growth * omega0 {
            break Trigger::OmegaGrowth {
                ratio: omega_now / omega0,
            };
        }
        let remaining = config.stop_time - state.t;
        if remaining <= 1e-12 * config.stop_time.max(1.0) {
            break Trigger::StopTime;
        }

        let cfl_dt = admissible_dt(&state, config.cfl)?;
        let dt = config.dt_max.min(cfl_dt).min(remaining);
        let next = time_step(&state, dt, &StepOptions { force: true, ..opts })?;
        if !next.is_finite() {
            break Trigger::NonFinite;
        }
        state = next;
        step += 1;
        if remaining - dt <= 1e-12 * config.stop_time.max(1.0) {
            // land exactly on the stop time
            state.t = config.stop_time;
        }

        let mut rec = diagnostics::record(&state, config.r)?;
        rec.accumulate_from(records.last().expect("previous record"));
        observe(step, &rec);
        records.push(rec);
        invariants.push(Invariants::of(&state)?);
        if config.snapshot_stride > 0 && step.is_multiple_of(config.snapshot_stride) {
            snapshots.push((step, state.clone()));
        }
    };

    if snapshots.last().map(|(s, _)| *s) != Some(step) {
        snapshots.push((step, state.clone()));
    }
    Ok(Trajectory {
        records,
        invariants,
        snapshots,
        outcome: Outcome {
            trigger,
            t: state.t,
            steps: step,
        },
        filter: config.filter,
    })
}
