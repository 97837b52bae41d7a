//! Dyadic Littlewood-Paley decomposition and nonhomogeneous Besov norms.
//!
//! The low-frequency cutoff `χ` is a fixed `C^∞` radial profile equal to 1 on
//! `|ξ| ≤ 3/4` and 0 on `|ξ| ≥ 4/3`, built from the smoothstep
//! `g(t) = exp(−1/t)·[t > 0]`:
//!
//! ```text
//! χ(r) = g(4/3 − r) / (g(4/3 − r) + g(r − 3/4))
//! φ(ξ) = χ(ξ/2) − χ(ξ)
//! Δ₋₁ = χ(D),   Δ_j = φ(2^{-j}D) for j ≥ 0,   Δ_j = 0 for j ≤ −2
//! ```
//!
//! Block `j ≥ 0` is supported in the annulus `2^j·3/4 ≤ |k| ≤ 2^j·8/3`, so on
//! an `n×n` grid every block above [`j_max`] vanishes identically.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{self, Grid, RealField, SpectralField};

pub const INNER_RADIUS: f64 = 0.75;
pub const OUTER_RADIUS: f64 = 4.0 / 3.0;

/// The radial cutoff `χ` and the annular profile `φ` derived from it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CutoffProfile;

fn smoothstep(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

impl CutoffProfile {
    pub fn new() -> Self {
        CutoffProfile
    }

    pub fn chi(&self, r: f64) -> f64 {
        let r = r.abs();
        if r <= INNER_RADIUS {
            return 1.0;
        }
        if r >= OUTER_RADIUS {
            return 0.0;
        }
        let inside = smoothstep(OUTER_RADIUS - r);
        inside / (inside + smoothstep(r - INNER_RADIUS))
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.chi(r / 2.0) - self.chi(r)
    }

    /// Symbol of `Δ_j` at radius `r`.
    pub fn block_symbol(&self, j: i32, r: f64) -> f64 {
        match j {
            j if j <= -2 => 0.0,
            -1 => self.chi(r),
            j => self.phi(r / 2f64.powi(j)),
        }
    }

    /// Symbol of `S_j = Σ_{j'<j} Δ_{j'}`, telescoped to `χ(2^{-j}r)`.
    pub fn low_pass_symbol(&self, j: i32, r: f64) -> f64 {
        if j <= -1 {
            0.0
        } else {
            self.chi(r / 2f64.powi(j))
        }
    }
}

pub fn build_cutoff() -> CutoffProfile {
    CutoffProfile::new()
}

/// Highest block index that can be nonzero on `grid`: the smallest `j` with
/// `2^j·3/4 > n/2`.
pub fn j_max(grid: Grid) -> i32 {
    let kmax = grid.max_wavenumber() as f64;
    let mut j = 0;
    while 2f64.powi(j) * INNER_RADIUS <= kmax {
        j += 1;
    }
    j
}

/// Besov index `(s, p, q)` with `p, q ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BesovIndex {
    pub s: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovIndex {
    pub fn new(s: f64, p: f64, q: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::Domain {
                what: "Besov regularity s",
                value: s,
            });
        }
        for (what, v) in [("Besov exponent p", p), ("Besov exponent q", q)] {
            if v.is_nan() || v < 1.0 {
                return Err(Error::Domain { what, value: v });
            }
        }
        Ok(Self { s, p, q })
    }

    /// `B⁰_{∞,1}`, the space the lifespan estimates live in.
    pub fn critical() -> Self {
        Self {
            s: 0.0,
            p: f64::INFINITY,
            q: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Symbol {
    Block(i32),
    LowPass(i32),
}

/// Symbol sampled on every grid mode, cached per `(n, symbol)`.
fn symbol_table(grid: Grid, symbol: Symbol) -> Arc<[f64]> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, Symbol), Arc<[f64]>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().expect("symbol cache poisoned").get(&(grid.n(), symbol)) {
        return Arc::clone(t);
    }
    let profile = CutoffProfile;
    let table: Arc<[f64]> = grid
        .modes()
        .map(|(_, k1, k2)| {
            let r = ((k1 * k1 + k2 * k2) as f64).sqrt();
            match symbol {
                Symbol::Block(j) => profile.block_symbol(j, r),
                Symbol::LowPass(j) => profile.low_pass_symbol(j, r),
            }
        })
        .collect();
    cache
        .lock()
        .expect("symbol cache poisoned")
        .insert((grid.n(), symbol), Arc::clone(&table));
    table
}

pub fn dyadic_block(f: &SpectralField, j: i32) -> SpectralField {
    if j <= -2 || j > j_max(f.grid()) {
        return SpectralField::zeros(f.grid());
    }
    f.apply_table(&symbol_table(f.grid(), Symbol::Block(j)))
}

pub fn partial_sum(f: &SpectralField, j: i32) -> SpectralField {
    if j <= -1 {
        return SpectralField::zeros(f.grid());
    }
    f.apply_table(&symbol_table(f.grid(), Symbol::LowPass(j)))
}

#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    blocks: Vec<SpectralField>,
    j_max: i32,
}

impl DyadicDecomposition {
    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// Block `Δ_j f`; zero outside `-1..=j_max`.
    pub fn block(&self, j: i32) -> SpectralField {
        if j < -1 || j > self.j_max {
            SpectralField::zeros(self.blocks[0].grid())
        } else {
            self.blocks[(j + 1) as usize].clone()
        }
    }

    /// `(j, Δ_j f)` for `j = -1 ..= j_max`.
    pub fn iter(&self) -> impl Iterator<Item = (i32, &SpectralField)> {
        self.blocks.iter().enumerate().map(|(i, b)| (i as i32 - 1, b))
    }

    pub fn reconstruct(&self) -> SpectralField {
        let mut sum = SpectralField::zeros(self.blocks[0].grid());
        for b in &self.blocks {
            sum += b;
        }
        sum
    }

    /// Dyadic spectrum `a_j = 2^{js}‖Δ_j f‖_{L^p}`.
    pub fn spectrum(&self, s: f64, p: f64) -> Result<DyadicSpectrum> {
        let refs: Vec<&SpectralField> = self.blocks.iter().collect();
        let norms = lp_norms(&refs, p)?;
        Ok(DyadicSpectrum::from_norms(s, p, norms))
    }
}

pub fn decompose(f: &SpectralField) -> DyadicDecomposition {
    let jm = j_max(f.grid());
    DyadicDecomposition {
        blocks: (-1..=jm).map(|j| dyadic_block(f, j)).collect(),
        j_max: jm,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DyadicEntry {
    pub j: i32,
    pub block_lp_norm: f64,
    pub weighted_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicSpectrum {
    pub s: f64,
    pub p: f64,
    pub entries: Vec<DyadicEntry>,
}

impl DyadicSpectrum {
    /// `norms[i]` is the block norm for `j = i − 1`.
    fn from_norms(s: f64, p: f64, norms: Vec<f64>) -> Self {
        let entries = norms
            .into_iter()
            .enumerate()
            .map(|(i, norm)| {
                let j = i as i32 - 1;
                DyadicEntry {
                    j,
                    block_lp_norm: norm,
                    weighted_value: 2f64.powf(j as f64 * s) * norm,
                }
            })
            .collect();
        Self { s, p, entries }
    }

    /// `ℓ^q` norm of the weighted values (sup when `q = ∞`).
    pub fn lq_norm(&self, q: f64) -> f64 {
        lq_norm(self.entries.iter().map(|e| e.weighted_value), q)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io("<dyadic spectrum csv>", e))?;
        Ok(())
    }
}

pub(crate) fn lq_norm(values: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        values.fold(0.0, |m, v| m.max(v.abs()))
    } else if q == 1.0 {
        values.map(f64::abs).sum()
    } else {
        values.map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// `L^p` norms of several spectral fields. `p = 2` uses Parseval; other
/// exponents inverse-transform two fields per FFT, skipping zero fields.
pub(crate) fn lp_norms(fields: &[&SpectralField], p: f64) -> Result<Vec<f64>> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain {
            what: "Lebesgue exponent p",
            value: p,
        });
    }
    if p == 2.0 {
        return Ok(fields.iter().map(|f| f.l2_norm()).collect());
    }
    let mut norms = vec![0.0; fields.len()];
    let nonzero: Vec<usize> = (0..fields.len()).filter(|&i| !fields[i].is_zero()).collect();
    for pair in nonzero.chunks(2) {
        match *pair {
            [a, b] => {
                let (fa, fb) = spectral::to_physical_pair(fields[a], fields[b])?;
                norms[a] = fa.lebesgue_norm(p)?;
                norms[b] = fb.lebesgue_norm(p)?;
            }
            [a] => norms[a] = fields[a].to_physical().lebesgue_norm(p)?,
            _ => unreachable!(),
        }
    }
    Ok(norms)
}

pub fn dyadic_spectrum(f: &SpectralField, s: f64, p: f64) -> Result<DyadicSpectrum> {
    decompose(f).spectrum(s, p)
}

pub fn besov_norm(f: &SpectralField, idx: BesovIndex) -> Result<f64> {
    Ok(dyadic_spectrum(f, idx.s, idx.p)?.lq_norm(idx.q))
}

/// Besov norm of a vector field: the max of the component norms.
pub fn besov_norm_vector(components: &[&SpectralField], idx: BesovIndex) -> Result<f64> {
    let mut best: f64 = 0.0;
    for c in components {
        best = best.max(besov_norm(c, idx)?);
    }
    Ok(best)
}

/// `‖f‖_{B⁰_{∞,1}}` for several fields, sharing inverse transforms.
pub(crate) fn critical_besov_norms(fields: &[&SpectralField]) -> Result<Vec<f64>> {
    let decs: Vec<DyadicDecomposition> = fields.iter().map(|f| decompose(f)).collect();
    let blocks: Vec<&SpectralField> = decs.iter().flat_map(|d| d.iter().map(|(_, b)| b)).collect();
    let norms = lp_norms(&blocks, f64::INFINITY)?;
    let mut at = 0;
    Ok(decs
        .iter()
        .map(|d| {
            let count = d.iter().count();
            let total = norms[at..at + count].iter().sum();
            at += count;
            total
        })
        .collect())
}

fn check_r(r: f64) -> Result<()> {
    if r > 1.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "Lebesgue exponent r (need 1 < r < ∞)",
            value: r,
        })
    }
}

/// `‖f‖_{B⁰_{∞,1} ∩ L^r}`, realized as the sum of the two norms.
pub fn besov_lr_norm(f: &SpectralField, r: f64) -> Result<f64> {
    check_r(r)?;
    Ok(besov_norm(f, BesovIndex::critical())? + f.to_physical().lebesgue_norm(r)?)
}

/// Intersection norm of a vector field: max-of-components Besov part plus the
/// `L^r` norm of the pointwise Euclidean magnitude.
pub fn besov_lr_norm_vector(components: &[&SpectralField], r: f64) -> Result<f64> {
    check_r(r)?;
    let besov = besov_norm_vector(components, BesovIndex::critical())?;
    let physical = spectral::to_physical_many(components)?;
    let refs: Vec<&RealField> = physical.iter().collect();
    Ok(besov + spectral::magnitude(&refs)?.lebesgue_norm(r)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{self, RandomSpectrum};
    use crate::spectral::{relative_l2_error, Axis};
    use rustfft::num_complex::Complex64;

    const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

    #[test]
    fn cutoff_examples() {
        let chi = build_cutoff();
        assert_eq!(chi.chi(0.0), 1.0);
        assert_eq!(chi.chi(0.75), 1.0);
        assert_eq!(chi.chi(2.0), 0.0);
        assert_eq!(chi.chi(4.0 / 3.0), 0.0);
        let sum = chi.chi(1.0) + chi.phi(1.0) + chi.phi(0.5);
        assert!((sum - 1.0).abs() < 1e-15);
        // χ(1) is strictly between the plateaus
        assert!(chi.chi(1.0) > 0.0 && chi.chi(1.0) < 1.0);
    }

    #[test]
    fn cutoff_is_nonincreasing() {
        let chi = build_cutoff();
        let mut prev = 1.0;
        for i in 0..=2000 {
            let v = chi.chi(i as f64 * 1e-3);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn cutoff_is_smooth() {
        // Second differences stay O(h²): no kinks in the transition region.
        let chi = build_cutoff();
        let h = 1e-3;
        let mut worst: f64 = 0.0;
        for i in 0..2000 {
            let r = 0.5 + i as f64 * 5e-4;
            let d2 = (chi.chi(r + h) - 2.0 * chi.chi(r) + chi.chi(r - h)) / (h * h);
            worst = worst.max(d2.abs());
        }
        assert!(worst < 100.0, "second derivative estimate {worst}");
    }

    #[test]
    fn partition_of_unity_on_grid_frequencies() {
        let chi = build_cutoff();
        for n in [8usize, 64, 256] {
            let g = Grid::new(n).unwrap();
            let jm = j_max(g);
            for (_, k1, k2) in g.modes() {
                let r = ((k1 * k1 + k2 * k2) as f64).sqrt();
                let sum: f64 = (-1..=jm).map(|j| chi.block_symbol(j, r)).sum();
                assert!((sum - 1.0).abs() <= 1e-12, "n={n} k=({k1},{k2}) sum={sum}");
                assert_eq!(chi.block_symbol(jm + 1, r), 0.0);
            }
        }
    }

    #[test]
    fn j_max_values() {
        assert_eq!(j_max(Grid::new(64).unwrap()), 6);
        assert_eq!(j_max(Grid::new(128).unwrap()), 7);
        // n = 80: 2^6·3/4 = 48 > 40
        assert_eq!(j_max(Grid::new(80).unwrap()), 6);
    }

    #[test]
    fn constant_lives_in_low_block() {
        let g = Grid::new(32).unwrap();
        let c = SpectralField::from_modes(g, &[(0, 0, Complex64::new(2.0, 0.0))]).unwrap();
        assert_eq!(dyadic_block(&c, -1), c);
        for j in 0..=j_max(g) + 1 {
            assert!(dyadic_block(&c, j).is_zero());
        }
        assert!(dyadic_block(&c, -2).is_zero());
    }

    #[test]
    fn mode_at_dyadic_radius_splits_over_three_blocks() {
        let g = Grid::new(64).unwrap();
        let chi = build_cutoff();
        let f = SpectralField::from_modes(g, &[(8, 0, ONE)]).unwrap();
        let mut total = 0.0;
        for j in -1..=j_max(g) {
            let w = dyadic_block(&f, j).coeff(8, 0).re / 0.5;
            if !(2..=4).contains(&j) {
                assert_eq!(w, 0.0, "block {j}");
            }
            assert!((w - chi.block_symbol(j, 8.0)).abs() < 1e-15);
            total += w;
        }
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decompose_examples() {
        let g = Grid::new(64).unwrap();
        let d = decompose(&SpectralField::zeros(g));
        assert!(d.iter().all(|(_, b)| b.is_zero()));

        let f = SpectralField::from_modes(g, &[(0, 0, Complex64::new(0.7, 0.0)), (8, 0, ONE)]).unwrap();
        let d = decompose(&f);
        assert!((d.block(-1).mean() - 0.7).abs() < 1e-15);
        assert_eq!(d.block(-1).coeff(8, 0), Complex64::default());
        // 2^j·3/4 < 8 < 2^j·8/3 holds for j ∈ {2, 3}; block 4 starts at 12.
        for (j, b) in d.iter() {
            let has_mode = b.coeff(8, 0) != Complex64::default();
            assert_eq!(has_mode, (2..=3).contains(&j), "block {j}");
        }

        let r = random::band_limited(g, RandomSpectrum::new(21, 0.5).with_mean(), &mut random::rng(11)).unwrap();
        assert!(relative_l2_error(&decompose(&r).reconstruct(), &r) <= 1e-12);
    }

    #[test]
    fn partial_sum_examples() {
        let g = Grid::new(64).unwrap();
        let f = random::band_limited(g, RandomSpectrum::new(20, 0.3).with_mean(), &mut random::rng(5)).unwrap();
        assert!(partial_sum(&f, -1).is_zero());
        assert!(partial_sum(&f, -3).is_zero());
        assert!(relative_l2_error(&partial_sum(&f, j_max(g) + 2), &f) < 1e-15);

        let c8 = SpectralField::from_modes(g, &[(8, 0, ONE)]).unwrap();
        assert!(partial_sum(&c8, 2).is_zero());

        // telescoped symbol equals the literal sum of blocks
        for j in 0..=j_max(g) + 1 {
            let mut literal = SpectralField::zeros(g);
            for jj in -1..j {
                literal += &dyadic_block(&f, jj);
            }
            assert!(relative_l2_error(&partial_sum(&f, j), &literal) < 1e-12 || literal.l2_norm() < 1e-14);
        }
    }

    #[test]
    fn block_supports_are_almost_orthogonal() {
        let g = Grid::new(128).unwrap();
        let f = random::band_limited(g, RandomSpectrum::new(42, 0.0), &mut random::rng(9)).unwrap();
        for j in 0..=j_max(g) {
            for jp in 0..=j_max(g) {
                if (j - jp).abs() >= 2 {
                    assert!(dyadic_block(&dyadic_block(&f, j), jp).is_zero(), "({j}, {jp})");
                }
            }
        }
    }

    #[test]
    fn besov_examples() {
        let g = Grid::new(64).unwrap();
        let idx = BesovIndex::new(1.3, 3.0, 2.0).unwrap();
        assert_eq!(besov_norm(&SpectralField::zeros(g), idx).unwrap(), 0.0);

        let c = SpectralField::from_modes(g, &[(0, 0, Complex64::new(-1.25, 0.0))]).unwrap();
        for (p, q) in [(1.0, 1.0), (2.0, 2.0), (3.0, f64::INFINITY), (f64::INFINITY, 1.0)] {
            let idx = BesovIndex::new(0.0, p, q).unwrap();
            assert!((besov_norm(&c, idx).unwrap() - 1.25).abs() < 1e-14);
        }
        // only Δ₋₁ survives, weighted by 2^{-s}
        for s in [-2.0, 1.3] {
            let idx = BesovIndex::new(s, 2.0, 1.0).unwrap();
            assert!((besov_norm(&c, idx).unwrap() - 1.25 * 2f64.powf(-s)).abs() < 1e-14);
        }
        assert!((besov_lr_norm(&c, 2.0).unwrap() - 2.5).abs() < 1e-14);
        assert_eq!(besov_lr_norm(&SpectralField::zeros(g), 2.0).unwrap(), 0.0);
        assert!(besov_lr_norm(&c, 1.0).is_err());
        assert!(besov_lr_norm(&c, f64::INFINITY).is_err());
    }

    #[test]
    fn cos8_critical_norm_by_brute_force() {
        // Oracle: Δ_j cos(8x₁) = φ_j(8)·cos(8x₁) and the grid max of cos(8x₁) is 1
        // at x₁ = 0, so the norm is Σ_j |φ_j(8)| over j = 2..4.
        let g = Grid::new(64).unwrap();
        let chi = build_cutoff();
        let f = SpectralField::from_modes(g, &[(8, 0, ONE)]).unwrap();
        let oracle: f64 = (2..=4).map(|j| chi.block_symbol(j, 8.0).abs()).sum();
        let got = besov_norm(&f, BesovIndex::critical()).unwrap();
        assert!((got - oracle).abs() < 1e-13, "{got} vs {oracle}");
        let lr = besov_lr_norm(&f, 2.0).unwrap();
        assert!((lr - oracle - 0.5f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn q_ordering_and_embedding() {
        let g = Grid::new(64).unwrap();
        let mut rng = random::rng(21);
        for _ in 0..20 {
            let f = random::band_limited(g, RandomSpectrum::new(21, 1.0).with_mean(), &mut rng).unwrap();
            let at = |q| besov_norm(&f, BesovIndex::new(0.5, 3.0, q).unwrap()).unwrap();
            let (n1, n2, ninf) = (at(1.0), at(2.0), at(f64::INFINITY));
            assert!(n1 >= n2 && n2 >= ninf);
            let sup = f.to_physical().lebesgue_norm(f64::INFINITY).unwrap();
            assert!(sup <= besov_norm(&f, BesovIndex::critical()).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bernstein_for_a_single_block() {
        let g = Grid::new(64).unwrap();
        let f = random::band_limited(g, RandomSpectrum::new(21, 0.0), &mut random::rng(2)).unwrap();
        for j in 0..=4 {
            let b = dyadic_block(&f, j);
            let grad = spectral::to_physical_many(&[&b.derivative(Axis::X1), &b.derivative(Axis::X2)]).unwrap();
            let mag = spectral::magnitude(&[&grad[0], &grad[1]]).unwrap();
            let lhs = mag.lebesgue_norm(2.0).unwrap();
            let rhs = 2f64.powi(j) * b.l2_norm();
            assert!(lhs <= 8.0 / 3.0 * rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn spectrum_csv_columns() {
        let g = Grid::new(16).unwrap();
        let f = SpectralField::from_modes(g, &[(2, 0, ONE)]).unwrap();
        let spec = dyadic_spectrum(&f, 1.0, 2.0).unwrap();
        let mut out = Vec::new();
        spec.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("j,block_lp_norm,weighted_value"));
        assert_eq!(text.lines().count(), 1 + spec.entries.len());
    }
}
