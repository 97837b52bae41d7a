//! Bony paraproduct calculus and the transport commutator `[u, Δ_j]·∇ω`.
//!
//! Every product here is pseudo-spectral with 2/3 truncation on both inputs and
//! on the result. Inputs are truncated on entry, so the quadratic products are
//! alias-free and the algebraic identities hold to rounding:
//!
//! ```text
//! fg = T_f g + T_g f + R(f, g)
//! T_f g  = Σ_j S_{j-1}f · Δ_j g
//! R(f,g) = Σ_j Σ_{|j'-j| ≤ 1} Δ_j f · Δ_{j'} g
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::littlewood_paley::{self as lp, BesovIndex};
use crate::spectral::{
    self, advect, magnitude, Axis, Grid, RealField, SpectralField, Velocity,
};

/// Divergence tolerance for the commutator preconditions.
pub const SOLENOIDAL_TOLERANCE: f64 = 1e-10;

/// Physical-space Littlewood-Paley blocks of one field, `j = -1 ..= j_max`.
struct PhysicalBlocks {
    grid: Grid,
    blocks: Vec<Option<RealField>>,
}

impl PhysicalBlocks {
    fn new(f: &SpectralField) -> Result<Self> {
        let decomposition = lp::decompose(f);
        let spectral: Vec<(i32, &SpectralField)> = decomposition.iter().collect();
        let nonzero: Vec<&SpectralField> = spectral
            .iter()
            .filter(|(_, b)| !b.is_zero())
            .map(|(_, b)| *b)
            .collect();
        let mut physical = spectral::to_physical_many(&nonzero)?.into_iter();
        let blocks = spectral
            .iter()
            .map(|(_, b)| if b.is_zero() { None } else { physical.next() })
            .collect();
        Ok(Self {
            grid: f.grid(),
            blocks,
        })
    }

    fn j_max(&self) -> i32 {
        self.blocks.len() as i32 - 2
    }

    fn block(&self, j: i32) -> Option<&RealField> {
        if j < -1 || j > self.j_max() {
            None
        } else {
            self.blocks[(j + 1) as usize].as_ref()
        }
    }
}

fn finish(grid: Grid, acc: Vec<f64>) -> SpectralField {
    RealField::new(grid, acc)
        .expect("finite products of finite fields")
        .to_spectral()
        .dealias()
}

fn paraproduct_blocks(f: &PhysicalBlocks, g: &PhysicalBlocks) -> SpectralField {
    let grid = f.grid;
    let mut acc = vec![0.0; grid.len()];
    let mut low = vec![0.0; grid.len()];
    for j in 1..=g.j_max() {
        // low = S_{j-1} f = Σ_{j' ≤ j-2} Δ_{j'} f
        if let Some(b) = f.block(j - 2) {
            for (l, v) in low.iter_mut().zip(b.samples()) {
                *l += v;
            }
        }
        if let Some(gb) = g.block(j) {
            for ((s, l), v) in acc.iter_mut().zip(&low).zip(gb.samples()) {
                *s += l * v;
            }
        }
    }
    finish(grid, acc)
}

fn remainder_blocks(f: &PhysicalBlocks, g: &PhysicalBlocks) -> SpectralField {
    let grid = f.grid;
    let mut acc = vec![0.0; grid.len()];
    // Σ_j [Δ_j f Δ_j g + (Δ_j f Δ_{j+1} g + Δ_{j+1} f Δ_j g)]; each bracket is
    // invariant under f ↔ g in floating point, which makes R exactly symmetric.
    for j in -1..=f.j_max() {
        let (fj, gj) = (f.block(j), g.block(j));
        let (fn_, gn) = (f.block(j + 1), g.block(j + 1));
        for i in 0..grid.len() {
            let at = |b: Option<&RealField>| b.map_or(0.0, |b| b.samples()[i]);
            let diag = at(fj) * at(gj);
            let cross = at(fj) * at(gn) + at(fn_) * at(gj);
            acc[i] += diag + cross;
        }
    }
    finish(grid, acc)
}

/// Paraproduct `T_f g`.
pub fn paraproduct(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.grid().ensure_same(&g.grid())?;
    let fb = PhysicalBlocks::new(&f.dealias())?;
    let gb = PhysicalBlocks::new(&g.dealias())?;
    Ok(paraproduct_blocks(&fb, &gb))
}

/// Remainder `R(f, g)`.
pub fn remainder(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.grid().ensure_same(&g.grid())?;
    let fb = PhysicalBlocks::new(&f.dealias())?;
    let gb = PhysicalBlocks::new(&g.dealias())?;
    Ok(remainder_blocks(&fb, &gb))
}

#[derive(Clone, Debug)]
pub struct BonySplit {
    pub t_f_g: SpectralField,
    pub t_g_f: SpectralField,
    pub remainder: SpectralField,
}

impl BonySplit {
    pub fn sum(&self) -> SpectralField {
        &(&self.t_f_g + &self.t_g_f) + &self.remainder
    }
}

/// `(T_f g, T_g f, R(f, g))`; their sum is the dealiased product of the
/// truncated inputs.
pub fn bony_split(f: &SpectralField, g: &SpectralField) -> Result<BonySplit> {
    f.grid().ensure_same(&g.grid())?;
    let fb = PhysicalBlocks::new(&f.dealias())?;
    let gb = PhysicalBlocks::new(&g.dealias())?;
    Ok(BonySplit {
        t_f_g: paraproduct_blocks(&fb, &gb),
        t_g_f: paraproduct_blocks(&gb, &fb),
        remainder: remainder_blocks(&fb, &gb),
    })
}

/// The product `P(Pf · Pg)` that [`bony_split`] reproduces.
pub fn dealiased_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    spectral::product(&f.dealias(), &g.dealias())
}

fn dealias_velocity(u: &Velocity) -> Velocity {
    Velocity {
        u1: u.u1.dealias(),
        u2: u.u2.dealias(),
    }
}

fn prepare(u: &Velocity, f: &SpectralField) -> Result<(Velocity, SpectralField)> {
    u.grid().ensure_same(&f.grid())?;
    u.ensure_solenoidal(SOLENOIDAL_TOLERANCE)?;
    Ok((dealias_velocity(u), f.dealias()))
}

/// Evaluates `[u, Δ_j]·∇f` for many `j` sharing the transforms of `u` and `u·∇f`.
struct CommutatorEngine {
    u1: RealField,
    u2: RealField,
    f: SpectralField,
    advected: SpectralField,
}

impl CommutatorEngine {
    fn new(u: &Velocity, f: &SpectralField) -> Result<Self> {
        let (u1, u2) = u.to_physical()?;
        Ok(Self {
            u1,
            u2,
            f: f.clone(),
            advected: advect(u, f)?,
        })
    }

    fn at(&self, j: i32) -> Result<SpectralField> {
        let block = lp::dyadic_block(&self.f, j);
        let (d1, d2) = spectral::to_physical_pair(&block.derivative(Axis::X1), &block.derivative(Axis::X2))?;
        let transported = spectral::advect_physical(&self.u1, &self.u2, &d1, &d2)
            .to_spectral()
            .dealias();
        Ok(&transported - &lp::dyadic_block(&self.advected, j))
    }
}

/// `[u, Δ_j]·∇ω = u·∇(Δ_j ω) − Δ_j(u·∇ω)` with dealiased products.
pub fn commutator(u: &Velocity, j: i32, omega: &SpectralField) -> Result<SpectralField> {
    let (u, omega) = prepare(u, omega)?;
    CommutatorEngine::new(&u, &omega)?.at(j)
}

/// The six pieces `R_j¹ … R_j⁶` of the transport commutator together with the
/// high-frequency velocity `ũ = u − Δ₋₁u` they are built from.
#[derive(Clone, Debug)]
pub struct CommutatorSplit {
    pub j: i32,
    pub terms: [SpectralField; 6],
    pub tilde_u: Velocity,
}

impl CommutatorSplit {
    pub fn sum(&self) -> SpectralField {
        let mut total = SpectralField::zeros(self.terms[0].grid());
        for t in &self.terms {
            total += t;
        }
        total
    }
}

/// Split `[u, Δ_j]·∇ω` as
///
/// ```text
/// R¹ = [T_{ũ^k}, Δ_j] ∂_k ω          R² = T_{∂_k Δ_j ω} ũ^k
/// R³ = −Δ_j T_{∂_k ω} ũ^k            R⁴ = ∂_k R(ũ^k, Δ_j ω)
/// R⁵ = −∂_k Δ_j R(ũ^k, ω)            R⁶ = [Δ₋₁u^k, Δ_j] ∂_k ω
/// ```
///
/// `R⁴` and `R⁵` use `div ũ = 0` to move the derivative outside the remainder.
pub fn six_term_decomposition(u: &Velocity, j: i32, omega: &SpectralField) -> Result<CommutatorSplit> {
    let (u, omega) = prepare(u, omega)?;
    let grid = omega.grid();
    let low = Velocity {
        u1: lp::dyadic_block(&u.u1, -1),
        u2: lp::dyadic_block(&u.u2, -1),
    };
    let tilde = Velocity {
        u1: &u.u1 - &low.u1,
        u2: &u.u2 - &low.u2,
    };
    let omega_j = lp::dyadic_block(&omega, j);
    let grad_omega = [omega.derivative(Axis::X1), omega.derivative(Axis::X2)];
    let grad_omega_j = [omega_j.derivative(Axis::X1), omega_j.derivative(Axis::X2)];

    let tilde_blocks = [PhysicalBlocks::new(&tilde.u1)?, PhysicalBlocks::new(&tilde.u2)?];
    let grad_blocks = [PhysicalBlocks::new(&grad_omega[0])?, PhysicalBlocks::new(&grad_omega[1])?];
    let grad_j_blocks = [
        PhysicalBlocks::new(&grad_omega_j[0])?,
        PhysicalBlocks::new(&grad_omega_j[1])?,
    ];
    let omega_blocks = PhysicalBlocks::new(&omega)?;
    let omega_j_blocks = PhysicalBlocks::new(&omega_j)?;

    let mut r = std::array::from_fn::<SpectralField, 6, _>(|_| SpectralField::zeros(grid));
    let axes = [Axis::X1, Axis::X2];
    for k in 0..2 {
        let t_low_high_j = paraproduct_blocks(&tilde_blocks[k], &grad_j_blocks[k]);
        let t_low_high = paraproduct_blocks(&tilde_blocks[k], &grad_blocks[k]);
        r[0] += &(&t_low_high_j - &lp::dyadic_block(&t_low_high, j));
        r[1] += &paraproduct_blocks(&grad_j_blocks[k], &tilde_blocks[k]);
        r[2] += &(-&lp::dyadic_block(&paraproduct_blocks(&grad_blocks[k], &tilde_blocks[k]), j));
        r[3] += &remainder_blocks(&tilde_blocks[k], &omega_j_blocks).derivative(axes[k]);
        r[4] += &(-&lp::dyadic_block(&remainder_blocks(&tilde_blocks[k], &omega_blocks), j).derivative(axes[k]));
    }
    r[5] = CommutatorEngine::new(&low, &omega)?.at(j)?;

    Ok(CommutatorSplit {
        j,
        terms: r,
        tilde_u: tilde,
    })
}

/// Sup over the grid of the Frobenius norm of `∇u`.
pub fn grad_sup(u: &Velocity) -> Result<f64> {
    let g = u.gradient();
    let phys = spectral::to_physical_many(&[&g[0][0], &g[0][1], &g[1][0], &g[1][1]])?;
    let refs: Vec<&RealField> = phys.iter().collect();
    Ok(magnitude(&refs)?.max_abs())
}

/// Sup over the grid of `|∇f|`.
pub fn scalar_grad_sup(f: &SpectralField) -> Result<f64> {
    let (a, b) = spectral::to_physical_pair(&f.derivative(Axis::X1), &f.derivative(Axis::X2))?;
    Ok(magnitude(&[&a, &b])?.max_abs())
}

fn is_constant_velocity(u: &Velocity) -> bool {
    u.gradient().iter().flatten().all(SpectralField::is_zero)
}

/// `‖(2^{j·shift}‖[u, Δ_j]·∇f‖_{L^p})_j‖_{ℓ^q}` over `j = −1 ..= j_max`.
fn commutator_sequence_norm(u: &Velocity, f: &SpectralField, shift: f64, idx: BesovIndex) -> Result<f64> {
    let engine = CommutatorEngine::new(u, f)?;
    let jm = lp::j_max(f.grid());
    let commutators = (-1..=jm).map(|j| engine.at(j)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SpectralField> = commutators.iter().collect();
    let norms = lp::lp_norms(&refs, idx.p)?;
    Ok(lp::lq_norm(
        norms
            .iter()
            .enumerate()
            .map(|(i, n)| 2f64.powf((i as f64 - 1.0) * shift) * n),
        idx.q,
    ))
}

fn check_positive_s(idx: BesovIndex) -> Result<()> {
    if idx.s > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "commutator regularity s (need s > 0)",
            value: idx.s,
        })
    }
}

/// Empirical constant in
/// `‖2^{j(s−1)}‖[u,Δ_j]·∇ω‖_{L^p}‖_{ℓ^q} ≤ C ‖∇u‖_{L^∞} ‖ω‖_{B^{s−1}_{p,q}}`.
///
/// A constant velocity commutes with every `Δ_j`, so the ratio is reported as 0.
pub fn commutator_ratio(u: &Velocity, omega: &SpectralField, idx: BesovIndex) -> Result<f64> {
    check_positive_s(idx)?;
    let (u, omega) = prepare(u, omega)?;
    if is_constant_velocity(&u) {
        return Ok(0.0);
    }
    let denominator = grad_sup(&u)? * lp::besov_norm(&omega, BesovIndex { s: idx.s - 1.0, ..idx })?;
    if denominator <= 0.0 {
        return Err(Error::Domain {
            what: "commutator ratio denominator",
            value: denominator,
        });
    }
    Ok(commutator_sequence_norm(&u, &omega, idx.s - 1.0, idx)? / denominator)
}

/// Same estimate for the temperature commutator at full regularity `s`:
/// `‖2^{js}‖[u,Δ_j]·∇θ‖_{L^p}‖_{ℓ^q} ≤ C (‖∇u‖_∞‖θ‖_{B^s} + ‖∇θ‖_∞‖ω‖_{B^{s−1}})`.
pub fn commutator_ratio_theta(
    u: &Velocity,
    theta: &SpectralField,
    omega: &SpectralField,
    idx: BesovIndex,
) -> Result<f64> {
    check_positive_s(idx)?;
    let (u, theta) = prepare(u, theta)?;
    omega.grid().ensure_same(&theta.grid())?;
    if is_constant_velocity(&u) {
        return Ok(0.0);
    }
    let omega = omega.dealias();
    let denominator = grad_sup(&u)? * lp::besov_norm(&theta, idx)?
        + scalar_grad_sup(&theta)? * lp::besov_norm(&omega, BesovIndex { s: idx.s - 1.0, ..idx })?;
    if denominator <= 0.0 {
        return Err(Error::Domain {
            what: "commutator ratio denominator",
            value: denominator,
        });
    }
    Ok(commutator_sequence_norm(&u, &theta, idx.s, idx)? / denominator)
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl Quantiles {
    /// Nearest-rank quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
        Some(Self {
            min: v[0],
            median: at(0.5),
            p90: at(0.9),
            max: v[v.len() - 1],
        })
    }
}

/// Ensemble verification summary, serialized as
/// `{test, n, ensemble_size, max_ratio, residuals}`.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub test: String,
    pub n: usize,
    pub ensemble_size: usize,
    pub max_ratio: Option<f64>,
    pub residuals: Option<Quantiles>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{self, RandomSpectrum};
    use crate::spectral::{relative_l2_error, velocity_from_vorticity};
    use rustfft::num_complex::Complex64;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn mode(g: Grid, k1: i64, k2: i64, c: f64) -> SpectralField {
        SpectralField::from_modes(g, &[(k1, k2, Complex64::new(c, 0.0))]).unwrap()
    }

    /// Term-by-term oracle for `T_f g` straight from the defining series,
    /// using spectral blocks and `spectral::product` for every term.
    fn paraproduct_oracle(f: &SpectralField, g: &SpectralField) -> SpectralField {
        let jm = lp::j_max(f.grid());
        let mut sum = SpectralField::zeros(f.grid());
        for j in 1..=jm {
            let low = lp::partial_sum(f, j - 1);
            sum += &spectral::product(&low, &lp::dyadic_block(g, j)).unwrap();
        }
        sum
    }

    #[test]
    fn paraproduct_zero_cases() {
        let g = grid(32);
        let f = mode(g, 3, 1, 1.0);
        let z = SpectralField::zeros(g);
        assert!(paraproduct(&f, &z).unwrap().is_zero());
        assert!(paraproduct(&z, &f).unwrap().is_zero());
        assert!(remainder(&f, &z).unwrap().is_zero());
    }

    #[test]
    fn paraproduct_of_constant_matches_series() {
        let g = grid(64);
        let c = mode(g, 0, 0, 1.7);
        let h = random::band_limited(g, RandomSpectrum::new(21, 0.5).with_mean(), &mut random::rng(4)).unwrap();
        let got = paraproduct(&c, &h).unwrap();
        let oracle = paraproduct_oracle(&c, &h);
        assert!(relative_l2_error(&got, &oracle) < 1e-13);
        // S_{j-1}c = c for j ≥ 1, so T_c h = c·(h − S_1 h)
        let closed = (&h - &lp::partial_sum(&h, 1)).scale(1.7);
        assert!(relative_l2_error(&got, &closed) < 1e-13);
    }

    #[test]
    fn paraproduct_single_modes() {
        let g = grid(64);
        let f = mode(g, 1, 0, 1.0);
        let h = mode(g, 0, 16, 1.0);
        let got = paraproduct(&f, &h).unwrap();
        let direct = spectral::product(&f, &h).unwrap();
        assert!(relative_l2_error(&got, &direct) < 1e-13);
    }

    #[test]
    fn remainder_of_separated_modes_vanishes() {
        let g = grid(256);
        let f = mode(g, 1, 0, 1.0);
        let h = mode(g, 64, 0, 1.0);
        assert!(remainder(&f, &h).unwrap().l2_norm() < 1e-15);
    }

    #[test]
    fn remainder_is_bitwise_symmetric() {
        let g = grid(64);
        let mut rng = random::rng(8);
        let f = random::band_limited(g, RandomSpectrum::new(21, 0.5), &mut rng).unwrap();
        let h = random::band_limited(g, RandomSpectrum::new(21, 0.5), &mut rng).unwrap();
        assert_eq!(remainder(&f, &h).unwrap(), remainder(&h, &f).unwrap());
    }

    #[test]
    fn bony_identity_examples() {
        let g = grid(64);
        let z = SpectralField::zeros(g);
        let f = mode(g, 8, 0, 1.0);
        let split = bony_split(&z, &f).unwrap();
        assert!(split.t_f_g.is_zero() && split.t_g_f.is_zero() && split.remainder.is_zero());

        let split = bony_split(&f, &f).unwrap();
        assert_eq!(split.t_f_g, split.t_g_f);
        let square = dealiased_product(&f, &f).unwrap();
        let twice = &split.t_f_g.scale(2.0) + &split.remainder;
        assert!(relative_l2_error(&twice, &square) < 1e-13);
        // cos²(8x₁) has a mean of 1/2 carried entirely by the remainder
        assert!((split.remainder.mean() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn bony_identity_random() {
        let g = grid(128);
        let mut rng = random::rng(77);
        for _ in 0..5 {
            let f = random::band_limited(g, RandomSpectrum::new(42, 0.5).with_mean(), &mut rng).unwrap();
            let h = random::band_limited(g, RandomSpectrum::new(42, 0.5).with_mean(), &mut rng).unwrap();
            let split = bony_split(&f, &h).unwrap();
            let direct = dealiased_product(&f, &h).unwrap();
            assert!(relative_l2_error(&split.sum(), &direct) <= 1e-11);
        }
    }

    #[test]
    fn commutator_trivial_cases() {
        let g = grid(64);
        let w = mode(g, 8, 0, 1.0);
        assert!(commutator(&Velocity::zeros(g), 3, &w).unwrap().is_zero());

        let u = Velocity::new(mode(g, 0, 0, 0.8), SpectralField::zeros(g)).unwrap();
        // cos(12x₁) sits entirely inside block 3 (φ(12/8) = 1)
        let w = mode(g, 12, 0, 1.0);
        assert!((lp::dyadic_block(&w, 3).coeff(12, 0).re - 0.5).abs() < 1e-15);
        assert!(commutator(&u, 3, &w).unwrap().l2_norm() < 1e-14);
    }

    #[test]
    fn commutator_rejects_compressible_velocity() {
        let g = grid(32);
        let u = Velocity::new(mode(g, 1, 0, 1.0), SpectralField::zeros(g)).unwrap();
        let w = mode(g, 2, 0, 1.0);
        assert!(matches!(commutator(&u, 1, &w), Err(Error::NotSolenoidal { .. })));
        assert!(six_term_decomposition(&u, 1, &w).is_err());
    }

    #[test]
    fn shear_commutator_equals_six_terms() {
        let g = grid(64);
        let u = velocity_from_vorticity(&mode(g, 0, 1, 1.0)).unwrap();
        let w = mode(g, 8, 0, 1.0);
        let direct = commutator(&u, 3, &w).unwrap();
        assert!(direct.l2_norm() > 1e-3);
        let split = six_term_decomposition(&u, 3, &w).unwrap();
        assert!(relative_l2_error(&split.sum(), &direct) < 1e-10);
    }

    #[test]
    fn constant_velocity_has_no_high_part() {
        let g = grid(64);
        let u = Velocity::new(mode(g, 0, 0, 0.3), mode(g, 0, 0, -1.1)).unwrap();
        let w = random::band_limited(g, RandomSpectrum::new(21, 1.0), &mut random::rng(1)).unwrap();
        for j in 1..=4 {
            let split = six_term_decomposition(&u, j, &w).unwrap();
            assert!(split.tilde_u.u1.is_zero() && split.tilde_u.u2.is_zero());
            for t in &split.terms[..5] {
                assert!(t.is_zero());
            }
            assert!(commutator(&u, j, &w).unwrap().l2_norm() < 1e-14);
            assert!(split.terms[5].l2_norm() < 1e-14);
        }
    }

    #[test]
    fn random_six_term_sum() {
        let g = grid(64);
        let mut rng = random::rng(12);
        let (u, _) = random::solenoidal(g, RandomSpectrum::new(21, 1.0), &mut rng).unwrap();
        let w = random::band_limited(g, RandomSpectrum::new(21, 1.0), &mut rng).unwrap();
        for j in -1..=5 {
            let direct = commutator(&u, j, &w).unwrap();
            let split = six_term_decomposition(&u, j, &w).unwrap();
            assert!(relative_l2_error(&split.sum(), &direct) <= 1e-10, "j = {j}");
        }
    }

    #[test]
    fn ratio_edge_cases() {
        let g = grid(64);
        let w = mode(g, 8, 0, 1.0);
        let idx = BesovIndex::new(2.5, 2.0, 2.0).unwrap();
        let konst = Velocity::new(mode(g, 0, 0, 1.0), SpectralField::zeros(g)).unwrap();
        assert_eq!(commutator_ratio(&konst, &w, idx).unwrap(), 0.0);

        let shear = velocity_from_vorticity(&mode(g, 0, 1, 1.0)).unwrap();
        assert!(commutator_ratio(&shear, &SpectralField::zeros(g), idx).is_err());
        assert!(commutator_ratio(&shear, &w, BesovIndex::new(0.0, 2.0, 2.0).unwrap()).is_err());
    }

    #[test]
    fn shear_ratio_regression() {
        // Baseline pinned from the first run of this configuration.
        let g = grid(64);
        let shear = velocity_from_vorticity(&mode(g, 0, 1, 1.0)).unwrap();
        let w = mode(g, 8, 0, 1.0);
        let idx = BesovIndex::new(2.5, 2.0, 2.0).unwrap();
        let ratio = commutator_ratio(&shear, &w, idx).unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
        assert!((ratio - SHEAR_RATIO_BASELINE).abs() < 1e-9 * SHEAR_RATIO_BASELINE, "{ratio:.15}");
    }

    const SHEAR_RATIO_BASELINE: f64 = 0.634985420692234;

    #[test]
    fn theta_ratio_is_finite() {
        let g = grid(64);
        let mut rng = random::rng(3);
        let (u, w) = random::solenoidal(g, RandomSpectrum::new(16, 1.5), &mut rng).unwrap();
        let th = random::band_limited(g, RandomSpectrum::new(16, 1.5), &mut rng).unwrap();
        let idx = BesovIndex::new(1.5, 2.0, 2.0).unwrap();
        let r = commutator_ratio_theta(&u, &th, &w, idx).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn quantiles() {
        let q = Quantiles::of(&[3.0, 1.0, 2.0, 5.0, 4.0]).unwrap();
        assert_eq!((q.min, q.median, q.max), (1.0, 3.0, 5.0));
        assert!(Quantiles::of(&[]).is_none());
    }

    #[test]
    fn report_json_shape() {
        let r = VerificationReport {
            test: "bony_identity".into(),
            n: 64,
            ensemble_size: 3,
            max_ratio: None,
            residuals: Quantiles::of(&[1e-16, 2e-16]),
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["test", "n", "ensemble_size", "max_ratio", "residuals"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
