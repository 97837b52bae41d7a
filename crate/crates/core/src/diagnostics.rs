//! Norm tracking along trajectories, the continuation integrals, transport and
//! bootstrap envelope checks, and the closed-form lifespan lower bounds.
//!
//! Two conventions for the constant appear here. The transport and bootstrap
//! checks use the constant `c` of the Gronwall estimates
//! (`Θ(t) ≤ Θ₀ e^{c∫Ω}` and friends), while [`lifespan_lower_bound_2d`] takes
//! the constant of the final lifespan formula, which is `C = 2c`.

use std::io::Write;

use serde::Serialize;

use crate::bony::grad_sup;
use crate::error::{Error, Result};
use crate::littlewood_paley::{self as lp, BesovIndex};
use crate::solver::{SolverState, Trajectory};
use crate::spectral::{self, velocity_from_vorticity, Axis, RealField, SpectralField};

/// Per-step diagnostics. `I1..I3` are trapezoidal running integrals of
/// `‖∇u‖_∞`, `‖ω‖_∞ + ‖∇θ‖_∞` and `‖∇θ‖_∞`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `Ω = ‖ω‖_{B⁰_{∞,1} ∩ L^r}`
    pub omega: f64,
    /// `Θ = ‖∇θ‖_{B⁰_{∞,1} ∩ L^r}`
    pub theta: f64,
    pub grad_u_inf: f64,
    pub omega_inf: f64,
    pub grad_theta_inf: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub r: f64,
    /// `‖ω‖_{B⁰_{∞,1}}`
    pub omega_besov: f64,
    /// `‖∂₁θ‖_{B⁰_{∞,1}}`
    pub dx_theta_besov: f64,
    /// `‖∇θ‖_{B⁰_{∞,1}}` (max over components)
    pub grad_theta_besov: f64,
    /// `‖∇u‖_{B⁰_{∞,1}}` (max over components)
    pub grad_u_besov: f64,
}

impl DiagnosticsRecord {
    /// Extend the running integrals from the previous record.
    pub fn accumulate_from(&mut self, prev: &DiagnosticsRecord) {
        let h = 0.5 * (self.t - prev.t);
        self.i1 = prev.i1 + h * (prev.grad_u_inf + self.grad_u_inf);
        self.i2 = prev.i2 + h * (prev.omega_inf + prev.grad_theta_inf + self.omega_inf + self.grad_theta_inf);
        self.i3 = prev.i3 + h * (prev.grad_theta_inf + self.grad_theta_inf);
    }
}

/// Evaluate every diagnostic of `state`. Integrals are left at zero.
pub fn record(state: &SolverState, r: f64) -> Result<DiagnosticsRecord> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::Domain {
            what: "Lebesgue exponent r (need 1 < r < ∞)",
            value: r,
        });
    }
    let omega = state.omega();
    let theta = state.theta();
    let u = velocity_from_vorticity(omega)?;
    let [[a11, a12], [a21, _]] = u.gradient();
    let t1 = theta.derivative(Axis::X1);
    let t2 = theta.derivative(Axis::X2);

    // ∂₂u₂ = −∂₁u₁ exactly, so three components carry the Besov norm of ∇u.
    let besov = lp::critical_besov_norms(&[omega, &t1, &t2, &a11, &a12, &a21])?;
    let phys = spectral::to_physical_many(&[omega, &t1, &t2])?;
    let grad_theta = spectral::magnitude(&[&phys[1], &phys[2]])?;

    let omega_besov = besov[0];
    let grad_theta_besov = besov[1].max(besov[2]);
    Ok(DiagnosticsRecord {
        t: state.t(),
        omega: omega_besov + phys[0].lebesgue_norm(r)?,
        theta: grad_theta_besov + grad_theta.lebesgue_norm(r)?,
        grad_u_inf: grad_sup(&u)?,
        omega_inf: phys[0].max_abs(),
        grad_theta_inf: grad_theta.max_abs(),
        i1: 0.0,
        i2: 0.0,
        i3: 0.0,
        r,
        omega_besov,
        dx_theta_besov: besov[1],
        grad_theta_besov,
        grad_u_besov: besov[3].max(besov[4]).max(besov[5]),
    })
}

pub const DIAG_COLUMNS: [&str; 9] = [
    "t",
    "Omega",
    "Theta",
    "grad_u_inf",
    "omega_inf",
    "grad_theta_inf",
    "I1",
    "I2",
    "I3",
];

pub fn write_diag_csv<W: Write>(writer: W, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DIAG_COLUMNS)?;
    for r in records {
        w.write_record(
            [r.t, r.omega, r.theta, r.grad_u_inf, r.omega_inf, r.grad_theta_inf, r.i1, r.i2, r.i3]
                .iter()
                .map(|v| format!("{v:e}")),
        )?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// `∫₀^{t_i} y` by the trapezoidal rule at every sample.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
        }
        out.push(acc);
    }
    out
}

// ---------------------------------------------------------------------------
// Lifespan bounds

/// A closed-form lifespan lower bound with its bootstrap variables.
///
/// With `C` the constant of the bound, `x = C·bound·Ω₀` and `y = CΩ₀²/Θ₀`
/// satisfy `exp(2(e^x − 1)) = 1 + y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LifespanBound {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "Omega0")]
    pub omega0: f64,
    #[serde(rename = "Theta0")]
    pub theta0: f64,
    pub bound: f64,
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
}

fn positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

/// `1/(a) · log(1 + ½ log(1 + y))`, accurate for small `y`.
fn log_log_bound(prefactor: f64, y: f64) -> f64 {
    (0.5 * y.ln_1p()).ln_1p() / prefactor
}

/// `T* ≥ 1/(CΩ₀) · log(1 + ½ log(1 + CΩ₀²/Θ₀))`.
pub fn lifespan_lower_bound_2d(omega0: f64, theta0: f64, c: f64) -> Result<LifespanBound> {
    positive("Omega0", omega0)?;
    positive("Theta0", theta0)?;
    positive("C", c)?;
    let y = c * omega0 * omega0 / theta0;
    let bound = log_log_bound(c * omega0, y);
    Ok(LifespanBound {
        c,
        omega0,
        theta0,
        bound,
        x: c * bound * omega0,
        y,
    })
}

/// Axisymmetric Euler with swirl:
/// `T* ≥ 1/(CW) · log(1 + ½ log(1 + CW/U))` with `W = ‖ω₀^θ‖_{B⁰_{∞,1}}` and
/// `U = ‖(u₀^θ)²‖_{B¹_{∞,1}}`.
pub fn lifespan_lower_bound_swirl(omega_theta_norm: f64, u_theta_sq_norm: f64, c: f64) -> Result<LifespanBound> {
    positive("omega_theta_norm", omega_theta_norm)?;
    positive("u_theta_sq_norm", u_theta_sq_norm)?;
    positive("C", c)?;
    let y = c * omega_theta_norm / u_theta_sq_norm;
    let bound = log_log_bound(c * omega_theta_norm, y);
    Ok(LifespanBound {
        c,
        omega0: omega_theta_norm,
        theta0: u_theta_sq_norm,
        bound,
        x: c * bound * omega_theta_norm,
        y,
    })
}

// ---------------------------------------------------------------------------
// Trajectory checks

/// Machine-readable outcome of an inequality check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    #[serde(rename = "C")]
    pub c: f64,
    pub holds: bool,
    /// Min over checked times of `(rhs − lhs)/rhs`; negative on violation.
    pub margin: f64,
    pub first_violation_t: Option<f64>,
}

/// Relative slack absorbing rounding when both sides agree at `t = 0`.
const SLACK: f64 = 1e-12;

struct Fold {
    holds: bool,
    margin: f64,
    first_violation_t: Option<f64>,
}

fn fold_checks(points: impl Iterator<Item = (f64, f64, f64)>) -> Fold {
    let mut out = Fold {
        holds: true,
        margin: f64::INFINITY,
        first_violation_t: None,
    };
    for (t, lhs, rhs) in points {
        let margin = if rhs > 0.0 {
            (rhs - lhs) / rhs
        } else if lhs <= 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        out.margin = out.margin.min(margin);
        if lhs > rhs * (1.0 + SLACK) + f64::MIN_POSITIVE && out.first_violation_t.is_none() {
            out.holds = false;
            out.first_violation_t = Some(t);
        }
    }
    if out.margin == f64::INFINITY {
        out.margin = 0.0;
    }
    out
}

fn nonempty(records: &[DiagnosticsRecord]) -> Result<()> {
    if records.is_empty() {
        Err(Error::Precondition("trajectory has no diagnostics records".into()))
    } else {
        Ok(())
    }
}

fn column(records: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> Vec<f64> {
    records.iter().map(f).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapReport {
    #[serde(flatten)]
    pub report: CheckReport,
    /// Largest recorded time with `T·Θ₀·exp(c∫₀^T Ω) ≤ Ω₀`.
    pub t_b: f64,
}

/// Verify `Ω(t) ≤ 2Ω₀ e^{2ctΩ₀}` on `[0, T_b]`.
pub fn bootstrap_check(traj: &Trajectory, c: f64) -> Result<BootstrapReport> {
    bootstrap_check_records(&traj.records, c)
}

pub fn bootstrap_check_records(records: &[DiagnosticsRecord], c: f64) -> Result<BootstrapReport> {
    nonempty(records)?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Domain { what: "C", value: c });
    }
    let t = column(records, |r| r.t);
    let omega = column(records, |r| r.omega);
    let int_omega = cumulative_trapezoid(&t, &omega);
    let (omega0, theta0) = (records[0].omega, records[0].theta);
    let t0 = t[0];

    let mut last = 0;
    for i in 0..records.len() {
        let elapsed = t[i] - t0;
        if elapsed * theta0 * (c * int_omega[i]).exp() <= omega0 {
            last = i;
        } else {
            break;
        }
    }
    let fold = fold_checks((0..=last).map(|i| {
        let envelope = 2.0 * omega0 * (2.0 * c * (t[i] - t0) * omega0).exp();
        (t[i], omega[i], envelope)
    }));
    Ok(BootstrapReport {
        report: CheckReport {
            check: "bootstrap_envelope".into(),
            c,
            holds: fold.holds,
            margin: fold.margin,
            first_violation_t: fold.first_violation_t,
        },
        t_b: t[last],
    })
}

/// One transport inequality evaluated along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: &'static str,
    pub holds: bool,
    pub margin: f64,
    pub first_violation_t: Option<f64>,
    /// Smallest `c ≥ 0` for which the inequality holds at every record.
    pub minimal_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransportReport {
    #[serde(flatten)]
    pub report: CheckReport,
    pub inequalities: Vec<InequalityReport>,
    /// Max of the per-inequality minimal constants.
    pub calibrated_c: f64,
}

/// Inequality `lhs ≤ a·(1 + c·s)` (kind Linear) or `lhs ≤ a·exp(c·s)`
/// (kind Exponential), sampled at each record.
enum Growth {
    Linear,
    Exponential,
}

struct Samples {
    t: Vec<f64>,
    lhs: Vec<f64>,
    a: Vec<f64>,
    s: Vec<f64>,
}

fn rhs(kind: &Growth, a: f64, s: f64, c: f64) -> f64 {
    match kind {
        Growth::Linear => a * (1.0 + c * s),
        Growth::Exponential => a * (c * s).exp(),
    }
}

/// Closed-form smallest admissible `c`: each record gives a lower bound on
/// `c` because the right side is monotone in `c`.
fn minimal_c(kind: &Growth, d: &Samples) -> f64 {
    let mut c_min: f64 = 0.0;
    for i in 0..d.t.len() {
        let (lhs, a, s) = (d.lhs[i], d.a[i], d.s[i]);
        if lhs <= a * (1.0 + SLACK) + f64::MIN_POSITIVE {
            continue;
        }
        if s <= 0.0 || a <= 0.0 {
            return f64::INFINITY;
        }
        let need = match kind {
            Growth::Linear => (lhs / a - 1.0) / s,
            Growth::Exponential => (lhs / a).ln() / s,
        };
        c_min = c_min.max(need);
    }
    c_min
}

fn evaluate(name: &'static str, kind: Growth, d: Samples, c: f64) -> InequalityReport {
    let fold = fold_checks((0..d.t.len()).map(|i| (d.t[i], d.lhs[i], rhs(&kind, d.a[i], d.s[i], c))));
    InequalityReport {
        name,
        holds: fold.holds,
        margin: fold.margin,
        first_violation_t: fold.first_violation_t,
        minimal_c: minimal_c(&kind, &d),
    }
}

/// Evaluate the transport estimates with constant `c`:
///
/// - `besov0`: `‖ω(t)‖_B ≤ (‖ω₀‖_B + ∫‖∂₁θ‖_B)(1 + c∫‖∇u‖_∞)`
/// - `besov1`: `‖∇θ(t)‖_B ≤ ‖∇θ₀‖_B exp(c∫‖∇u‖_B)`
/// - `theta`: `Θ(t) ≤ Θ₀ exp(c∫Ω)`
/// - `omega`: `Ω(t) ≤ (Ω₀ + ∫Θ)(1 + c∫Ω)`
///
/// where `B = B⁰_{∞,1}`. Also returns the smallest `c` making each hold.
pub fn transport_bound_check(traj: &Trajectory, c: f64) -> Result<TransportReport> {
    transport_bound_check_records(&traj.records, c)
}

pub fn transport_bound_check_records(records: &[DiagnosticsRecord], c: f64) -> Result<TransportReport> {
    nonempty(records)?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Domain { what: "C", value: c });
    }
    let t = column(records, |r| r.t);
    let integral = |f: fn(&DiagnosticsRecord) -> f64| cumulative_trapezoid(&t, &column(records, f));
    let int_dx_theta = integral(|r| r.dx_theta_besov);
    let int_grad_u = integral(|r| r.grad_u_inf);
    let int_grad_u_besov = integral(|r| r.grad_u_besov);
    let int_omega = integral(|r| r.omega);
    let int_theta = integral(|r| r.theta);
    let r0 = records[0];

    let inequalities = vec![
        evaluate(
            "besov0",
            Growth::Linear,
            Samples {
                t: t.clone(),
                lhs: column(records, |r| r.omega_besov),
                a: int_dx_theta.iter().map(|i| r0.omega_besov + i).collect(),
                s: int_grad_u,
            },
            c,
        ),
        evaluate(
            "besov1",
            Growth::Exponential,
            Samples {
                t: t.clone(),
                lhs: column(records, |r| r.grad_theta_besov),
                a: vec![r0.grad_theta_besov; t.len()],
                s: int_grad_u_besov,
            },
            c,
        ),
        evaluate(
            "theta",
            Growth::Exponential,
            Samples {
                t: t.clone(),
                lhs: column(records, |r| r.theta),
                a: vec![r0.theta; t.len()],
                s: int_omega.clone(),
            },
            c,
        ),
        evaluate(
            "omega",
            Growth::Linear,
            Samples {
                t: t.clone(),
                lhs: column(records, |r| r.omega),
                a: int_theta.iter().map(|i| r0.omega + i).collect(),
                s: int_omega,
            },
            c,
        ),
    ];
    let holds = inequalities.iter().all(|q| q.holds);
    let margin = inequalities.iter().map(|q| q.margin).fold(f64::INFINITY, f64::min);
    let first_violation_t = inequalities
        .iter()
        .filter_map(|q| q.first_violation_t)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    let calibrated_c = inequalities.iter().map(|q| q.minimal_c).fold(0.0, f64::max);
    Ok(TransportReport {
        report: CheckReport {
            check: "transport_bounds".into(),
            c,
            holds,
            margin,
            first_violation_t,
        },
        inequalities,
        calibrated_c,
    })
}

// ---------------------------------------------------------------------------
// Static inequalities

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogInterpolationReport {
    pub check: &'static str,
    pub index: BesovIndex,
    pub ratios: Vec<f64>,
    pub skipped: usize,
    pub max_ratio: Option<f64>,
}

/// `‖∇u‖_∞ / ((‖ω‖_{L^p} + ‖ω‖_∞) · log(e + ‖ω‖_{B^{s−1}_{p,q}}))` with
/// `u` the Biot–Savart velocity of `ω`. `None` for `ω = 0`.
pub fn log_interpolation_ratio(omega: &SpectralField, idx: BesovIndex) -> Result<Option<f64>> {
    if !(idx.s > 1.0 + 2.0 / idx.p) {
        return Err(Error::Precondition(format!(
            "log interpolation needs s > 1 + 2/p, got s={} p={}",
            idx.s, idx.p
        )));
    }
    if omega.is_zero() {
        return Ok(None);
    }
    let u = velocity_from_vorticity(omega)?;
    let physical = omega.to_physical();
    let lp_part = physical.lebesgue_norm(idx.p)? + physical.max_abs();
    let besov = lp::besov_norm(omega, BesovIndex::new(idx.s - 1.0, idx.p, idx.q)?)?;
    Ok(Some(grad_sup(&u)? / (lp_part * (std::f64::consts::E + besov).ln())))
}

pub fn log_interpolation_check(fields: &[SpectralField], idx: BesovIndex) -> Result<LogInterpolationReport> {
    let mut ratios = Vec::with_capacity(fields.len());
    let mut skipped = 0;
    for f in fields {
        match log_interpolation_ratio(f, idx)? {
            Some(r) => ratios.push(r),
            None => skipped += 1,
        }
    }
    let max_ratio = ratios.iter().copied().reduce(f64::max);
    Ok(LogInterpolationReport {
        check: "log_interpolation",
        index: idx,
        ratios,
        skipped,
        max_ratio,
    })
}

/// `‖∇u‖_{L^p} / ‖ω‖_{L^p}` with `|∇u|` the pointwise Frobenius norm.
pub fn calderon_zygmund_ratio(omega: &SpectralField, p: f64) -> Result<f64> {
    let u = velocity_from_vorticity(omega)?;
    let g = u.gradient();
    let phys = spectral::to_physical_many(&[&g[0][0], &g[0][1], &g[1][0], &g[1][1]])?;
    let refs: Vec<&RealField> = phys.iter().collect();
    let num = spectral::magnitude(&refs)?.lebesgue_norm(p)?;
    let den = omega.to_physical().lebesgue_norm(p)?;
    if den == 0.0 {
        return Err(Error::Domain {
            what: "‖ω‖_{L^p} (zero vorticity)",
            value: den,
        });
    }
    Ok(num / den)
}
