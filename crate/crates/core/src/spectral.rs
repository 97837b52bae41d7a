//! Fields on the periodic torus `[0, 2π)²` and the spectral operators acting on them.
//!
//! A [`RealField`] holds collocation samples at `x_ab = (2πa/n, 2πb/n)`, stored
//! row-major with `a` (the `x₁` index) varying slowest. A [`SpectralField`] holds
//! the discrete Fourier coefficients in the same layout, normalized so that a
//! constant field `c` has `coeff(0, 0) == c`:
//!
//! ```text
//! f̂(k) = n⁻² Σ_ab f(x_ab) e^{-i k·x_ab}
//! ```
//!
//! Wavenumbers along each axis run over `-n/2+1 ..= n/2`; the positive `n/2`
//! entry is the Nyquist mode.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Tolerance on the mean used by the zero-mean preconditions.
pub const MEAN_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_POINTS {
            return Err(Error::InvalidGrid {
                n,
                reason: "need at least 8 points per axis",
            });
        }
        if !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid {
                n,
                reason: "points per axis must be even",
            });
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of collocation points, `n²`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// The 2/3-rule cutoff `k_c = floor(n/3)`.
    #[inline]
    pub fn dealias_cutoff(&self) -> usize {
        self.n / 3
    }

    /// Largest wavenumber per axis, `n/2`.
    #[inline]
    pub fn max_wavenumber(&self) -> usize {
        self.n / 2
    }

    /// Grid spacing `Δx = 2π/n`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    #[inline]
    pub fn coordinate(&self, index: usize) -> f64 {
        2.0 * PI * index as f64 / self.n as f64
    }

    /// Signed wavenumber stored at FFT index `index`.
    #[inline]
    pub fn wavenumber(&self, index: usize) -> i64 {
        if index <= self.n / 2 {
            index as i64
        } else {
            index as i64 - self.n as i64
        }
    }

    /// FFT index holding wavenumber `k`, if representable.
    pub fn index_of(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k > half || k <= -half {
            return None;
        }
        Some(k.rem_euclid(self.n as i64) as usize)
    }

    #[inline]
    fn is_nyquist(&self, index: usize) -> bool {
        index == self.n / 2
    }

    /// Iterate `(flat_index, k1, k2)` over every stored coefficient.
    pub fn modes(&self) -> impl Iterator<Item = (usize, i64, i64)> + '_ {
        (0..self.n).flat_map(move |a| {
            let k1 = self.wavenumber(a);
            (0..self.n).map(move |b| (a * self.n + b, k1, self.wavenumber(b)))
        })
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.n,
                right: other.n,
            })
        }
    }

    /// Flat index of the coefficient at `-k` given the flat index of `k`.
    #[inline]
    fn conjugate_index(&self, flat: usize) -> usize {
        let n = self.n;
        let (a, b) = (flat / n, flat % n);
        ((n - a) % n) * n + (n - b) % n
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n, self.n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

// ---------------------------------------------------------------------------
// FFT plumbing

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

fn transpose_in_place(buf: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (ib..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                let j0 = if ib == jb { i + 1 } else { jb };
                for j in j0..(jb + BLOCK).min(n) {
                    buf.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Unnormalized 2D transform of a row-major `n×n` buffer.
fn fft2(buf: &mut [Complex64], n: usize, inverse: bool) {
    let plans = plans(n);
    let fft = if inverse { &plans.inverse } else { &plans.forward };
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
    transpose_in_place(buf, n);
    fft.process_with_scratch(buf, &mut scratch);
    transpose_in_place(buf, n);
}

// ---------------------------------------------------------------------------
// Physical-space fields

#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: Grid,
    samples: Vec<f64>,
}

impl RealField {
    /// Wrap collocation samples; rejects NaN/Inf and wrong lengths.
    pub fn new(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::LengthMismatch {
                got: samples.len(),
                expected: grid.len(),
            });
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.len()],
        }
    }

    /// Sample `f(x₁, x₂)` at the collocation points.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let n = grid.n();
        let mut samples = Vec::with_capacity(grid.len());
        for a in 0..n {
            let x1 = grid.coordinate(a);
            for b in 0..n {
                samples.push(f(x1, grid.coordinate(b)));
            }
        }
        Self::new(grid, samples)
    }

    pub(crate) fn from_raw(grid: Grid, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid, samples }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.samples[a * self.grid.n() + b]
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.grid.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Normalized-measure Lebesgue norm, so that `‖1‖_p = 1` for every `p`.
    ///
    /// `p = f64::INFINITY` gives the maximum over collocation points.
    pub fn lebesgue_norm(&self, p: f64) -> Result<f64> {
        lp_norm_of(&self.samples, p)
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == 0.0)
    }

    pub fn to_spectral(&self) -> SpectralField {
        let n = self.grid.n();
        let mut buf: Vec<Complex64> = self
            .samples
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft2(&mut buf, n, false);
        let scale = 1.0 / self.grid.len() as f64;
        for c in &mut buf {
            *c *= scale;
        }
        // Exact Hermitian symmetry: average each coefficient with its mirror.
        let mut out = buf.clone();
        for (i, c) in out.iter_mut().enumerate() {
            let j = self.grid.conjugate_index(i);
            *c = 0.5 * (buf[i] + buf[j].conj());
        }
        SpectralField {
            grid: self.grid,
            coeffs: out,
        }
    }
}

/// Normalized `L^p` norm of raw samples.
pub(crate) fn lp_norm_of(samples: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain {
            what: "Lebesgue exponent p",
            value: p,
        });
    }
    if p.is_infinite() {
        return Ok(samples.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    }
    let len = samples.len() as f64;
    if p == 1.0 {
        return Ok(samples.iter().map(|v| v.abs()).sum::<f64>() / len);
    }
    if p == 2.0 {
        return Ok((samples.iter().map(|v| v * v).sum::<f64>() / len).sqrt());
    }
    // Scale by the max to keep |f|^p representable for large p.
    let max = samples.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = samples.iter().map(|v| (v.abs() / max).powf(p)).sum();
    Ok(max * (sum / len).powf(1.0 / p))
}

/// Pointwise Euclidean magnitude of a vector of fields on the same grid.
pub fn magnitude(components: &[&RealField]) -> Result<RealField> {
    let first = components
        .first()
        .ok_or_else(|| Error::Precondition("magnitude of an empty vector".into()))?;
    let grid = first.grid();
    for c in components {
        grid.ensure_same(&c.grid())?;
    }
    let samples = (0..grid.len())
        .map(|i| {
            components
                .iter()
                .map(|c| c.samples[i] * c.samples[i])
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(RealField::from_raw(grid, samples))
}

/// Pointwise product of physical fields (no dealiasing).
pub(crate) fn pointwise_product(a: &RealField, b: &RealField) -> RealField {
    let samples = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| x * y)
        .collect();
    RealField::from_raw(a.grid, samples)
}

// ---------------------------------------------------------------------------
// Spectral fields

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    /// Wrap raw coefficients in FFT layout. Hermitian symmetry is the caller's
    /// responsibility; [`SpectralField::from_modes`] builds it automatically.
    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::LengthMismatch {
                got: coeffs.len(),
                expected: grid.len(),
            });
        }
        if let Some(index) = coeffs
            .iter()
            .position(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, coeffs })
    }

    /// Build the real field `Σ Re(ĉ e^{ik·x})` from a list of `(k1, k2, ĉ)`
    /// modes. Repeated modes add.
    pub fn from_modes(grid: Grid, modes: &[(i64, i64, Complex64)]) -> Result<Self> {
        let mut field = Self::zeros(grid);
        for &(k1, k2, c) in modes {
            let (Some(a), Some(b)) = (grid.index_of(k1), grid.index_of(k2)) else {
                return Err(Error::Precondition(format!(
                    "mode ({k1}, {k2}) is not representable on a {grid} grid"
                )));
            };
            let i = a * grid.n() + b;
            let j = grid.conjugate_index(i);
            if i == j {
                field.coeffs[i] += Complex64::new(c.re, 0.0);
            } else {
                field.coeffs[i] += 0.5 * c;
                field.coeffs[j] += 0.5 * c.conj();
            }
        }
        Ok(field)
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient at wave vector `(k1, k2)`; zero if not representable.
    pub fn coeff(&self, k1: i64, k2: i64) -> Complex64 {
        match (self.grid.index_of(k1), self.grid.index_of(k2)) {
            (Some(a), Some(b)) => self.coeffs[a * self.grid.n() + b],
            _ => Complex64::default(),
        }
    }

    #[inline]
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn to_physical(&self) -> RealField {
        let mut buf = self.coeffs.clone();
        fft2(&mut buf, self.grid.n(), true);
        RealField::from_raw(self.grid, buf.into_iter().map(|c| c.re).collect())
    }

    /// `L²` norm via Parseval under the normalized measure.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Multiply every coefficient by a real symbol `m(k1, k2)`.
    pub fn apply_multiplier(&self, symbol: impl Fn(i64, i64) -> f64) -> Self {
        let coeffs = self
            .grid
            .modes()
            .map(|(i, k1, k2)| self.coeffs[i] * symbol(k1, k2))
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    /// Multiply by a symbol pre-sampled in flat mode order.
    pub(crate) fn apply_table(&self, table: &[f64]) -> Self {
        debug_assert_eq!(table.len(), self.coeffs.len());
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(table).map(|(c, m)| c * m).collect(),
        }
    }

    /// Multiply by a real radial symbol `m(|k|)`.
    pub fn apply_radial(&self, symbol: impl Fn(f64) -> f64) -> Self {
        self.apply_multiplier(|k1, k2| symbol(((k1 * k1 + k2 * k2) as f64).sqrt()))
    }

    /// Multiply by `i·k_axis`; the Nyquist mode of the differentiated axis is zeroed.
    pub fn derivative(&self, axis: Axis) -> Self {
        let n = self.grid.n();
        // the Nyquist wavenumber maps to 0, which zeroes that mode
        let ks: Vec<f64> = (0..n)
            .map(|i| if self.grid.is_nyquist(i) { 0.0 } else { self.grid.wavenumber(i) as f64 })
            .collect();
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (a, row) in self.coeffs.chunks_exact(n).enumerate() {
            match axis {
                Axis::X1 => {
                    let k = ks[a];
                    coeffs.extend(row.iter().map(|c| Complex64::new(-k * c.im, k * c.re)));
                }
                Axis::X2 => {
                    coeffs.extend(row.iter().zip(&ks).map(|(c, &k)| Complex64::new(-k * c.im, k * c.re)));
                }
            }
        }
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    /// Solve `Δψ = f` with the zero-mean gauge.
    pub fn invert_laplacian(&self) -> Result<Self> {
        let mean = self.mean();
        if mean.abs() > MEAN_TOLERANCE {
            return Err(Error::NonzeroMean { mean });
        }
        let mut out = self.apply_multiplier(|k1, k2| {
            let k2sum = k1 * k1 + k2 * k2;
            if k2sum == 0 {
                0.0
            } else {
                -1.0 / k2sum as f64
            }
        });
        out.coeffs[0] = Complex64::default();
        Ok(out)
    }

    pub fn laplacian(&self) -> Self {
        self.apply_multiplier(|k1, k2| -((k1 * k1 + k2 * k2) as f64))
    }

    /// Zero every coefficient with `max(|k1|, |k2|) > k_c`. Idempotent.
    pub fn dealias(&self) -> Self {
        let kc = self.grid.dealias_cutoff() as i64;
        self.apply_multiplier(|k1, k2| if k1.abs().max(k2.abs()) > kc { 0.0 } else { 1.0 })
    }

    /// True when no coefficient beyond the dealiasing cutoff is nonzero.
    pub fn is_dealiased(&self) -> bool {
        let kc = self.grid.dealias_cutoff() as i64;
        self.grid
            .modes()
            .all(|(i, k1, k2)| k1.abs().max(k2.abs()) <= kc || self.coeffs[i] == Complex64::default())
    }

    /// Fraction of spectral energy carried by modes with `max(|k1|,|k2|) > threshold`.
    /// Returns 0 for the zero field.
    pub fn tail_fraction(&self, threshold: usize) -> f64 {
        let threshold = threshold as i64;
        let mut total = 0.0;
        let mut tail = 0.0;
        for (i, k1, k2) in self.grid.modes() {
            let e = self.coeffs[i].norm_sqr();
            total += e;
            if k1.abs().max(k2.abs()) > threshold {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Value, gradient and Hessian `[h11, h12, h22]` of the trigonometric
    /// interpolant at `(x1, x2)`.
    fn jet(&self, x1: f64, x2: f64) -> (f64, [f64; 2], [f64; 3]) {
        let n = self.grid.n();
        let ks: Vec<f64> = (0..n).map(|i| self.grid.wavenumber(i) as f64).collect();
        let e1: Vec<Complex64> = ks.iter().map(|&k| Complex64::from_polar(1.0, k * x1)).collect();
        let e2: Vec<Complex64> = ks.iter().map(|&k| Complex64::from_polar(1.0, k * x2)).collect();
        let (mut v, mut g, mut h) = (0.0, [0.0; 2], [0.0; 3]);
        for a in 0..n {
            for b in 0..n {
                let c = self.coeffs[a * n + b];
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let z = c * e1[a] * e2[b];
                let (k1, k2) = (ks[a], ks[b]);
                v += z.re;
                // ∂ brings down i·k
                g[0] -= k1 * z.im;
                g[1] -= k2 * z.im;
                h[0] -= k1 * k1 * z.re;
                h[1] -= k1 * k2 * z.re;
                h[2] -= k2 * k2 * z.re;
            }
        }
        (v, g, h)
    }

    /// Value of the trigonometric interpolant at an arbitrary point.
    pub fn evaluate(&self, x1: f64, x2: f64) -> f64 {
        self.jet(x1, x2).0
    }

    /// `(min, max)` of the trigonometric interpolant: grid extrema refined by
    /// Newton's method on the gradient.
    pub fn extrema(&self) -> (f64, f64) {
        let phys = self.to_physical();
        let lo = -self.refine_max(&phys.samples.iter().map(|v| -v).collect::<Vec<_>>(), -1.0);
        let hi = self.refine_max(&phys.samples, 1.0);
        (lo, hi)
    }

    /// Max of `sign·f`, seeded from the largest discrete local maxima of `samples = sign·f`.
    fn refine_max(&self, samples: &[f64], sign: f64) -> f64 {
        const SEEDS: usize = 8;
        let n = self.grid.n();
        let at = |a: usize, b: usize| samples[(a % n) * n + (b % n)];
        let mut seeds: Vec<(f64, usize, usize)> = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let v = at(a, b);
                let is_peak = [(n - 1, 0), (1, 0), (0, n - 1), (0, 1), (n - 1, n - 1), (1, 1), (n - 1, 1), (1, n - 1)]
                    .iter()
                    .all(|&(da, db)| at(a + da, b + db) <= v);
                if is_peak {
                    seeds.push((v, a, b));
                }
            }
        }
        seeds.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut best = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for &(v0, a, b) in seeds.iter().take(SEEDS) {
            let (mut x1, mut x2) = (self.grid.coordinate(a), self.grid.coordinate(b));
            let mut value = v0;
            for _ in 0..20 {
                let (v, g, h) = self.jet(x1, x2);
                value = value.max(sign * v);
                let det = h[0] * h[2] - h[1] * h[1];
                if det == 0.0 {
                    break;
                }
                let d1 = (h[2] * g[0] - h[1] * g[1]) / det;
                let d2 = (h[0] * g[1] - h[1] * g[0]) / det;
                // stay within a cell of the seed
                if (d1 * d1 + d2 * d2).sqrt() > self.grid.spacing() {
                    break;
                }
                x1 -= d1;
                x2 -= d2;
                if d1.abs() + d2.abs() < 1e-14 {
                    value = value.max(sign * self.evaluate(x1, x2));
                    break;
                }
            }
            best = best.max(value);
        }
        best
    }

    /// Largest violation of `ĉ(-k) = conj ĉ(k)`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| (self.coeffs[i] - self.coeffs[self.grid.conjugate_index(i)].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Combine two fields coefficient-wise; panics on grid mismatch.
    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(
            self.grid, other.grid,
            "spectral arithmetic on mismatched grids"
        );
        Self {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        assert_eq!(self.grid, rhs.grid, "spectral arithmetic on mismatched grids");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

/// Relative `L²` distance `‖a − b‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_l2_error(a: &SpectralField, b: &SpectralField) -> f64 {
    let diff = (a - b).l2_norm();
    let scale = b.l2_norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Inverse-transform two real fields with a single complex FFT.
pub fn to_physical_pair(a: &SpectralField, b: &SpectralField) -> Result<(RealField, RealField)> {
    a.grid.ensure_same(&b.grid)?;
    // Pairing leaks rounding noise between the two outputs; keep exact zeros exact.
    if a.is_zero() || b.is_zero() {
        return Ok((a.to_physical(), b.to_physical()));
    }
    let i = Complex64::new(0.0, 1.0);
    let mut buf: Vec<Complex64> = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(&x, &y)| x + i * y)
        .collect();
    fft2(&mut buf, a.grid.n(), true);
    let re = buf.iter().map(|c| c.re).collect();
    let im = buf.iter().map(|c| c.im).collect();
    Ok((RealField::from_raw(a.grid, re), RealField::from_raw(a.grid, im)))
}

/// Forward-transform two real fields with a single complex FFT.
pub fn to_spectral_pair(f: &RealField, g: &RealField) -> Result<(SpectralField, SpectralField)> {
    f.grid.ensure_same(&g.grid)?;
    let grid = f.grid;
    if f.is_zero() || g.is_zero() {
        return Ok((f.to_spectral(), g.to_spectral()));
    }
    let mut buf: Vec<Complex64> = f
        .samples
        .iter()
        .zip(&g.samples)
        .map(|(&x, &y)| Complex64::new(x, y))
        .collect();
    fft2(&mut buf, grid.n(), false);
    let scale = 1.0 / grid.len() as f64;
    let mut first = Vec::with_capacity(grid.len());
    let mut second = Vec::with_capacity(grid.len());
    for (idx, &z) in buf.iter().enumerate() {
        let zc = buf[grid.conjugate_index(idx)].conj();
        first.push(0.5 * (z + zc) * scale);
        // (z - zc) / 2i
        let d = 0.5 * (z - zc) * scale;
        second.push(Complex64::new(d.im, -d.re));
    }
    Ok((
        SpectralField {
            grid,
            coeffs: first,
        },
        SpectralField {
            grid,
            coeffs: second,
        },
    ))
}

/// Inverse-transform any number of fields, two per FFT.
pub fn to_physical_many(fields: &[&SpectralField]) -> Result<Vec<RealField>> {
    let mut out = Vec::with_capacity(fields.len());
    for chunk in fields.chunks(2) {
        match chunk {
            [a, b] => {
                let (x, y) = to_physical_pair(a, b)?;
                out.push(x);
                out.push(y);
            }
            [a] => out.push(a.to_physical()),
            _ => unreachable!(),
        }
    }
    Ok(out)
}

/// Dealiased product `P_{k_c}(a·b)` of two spectral fields.
pub fn product(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    let (pa, pb) = to_physical_pair(a, b)?;
    Ok(pointwise_product(&pa, &pb).to_spectral().dealias())
}

// ---------------------------------------------------------------------------
// Velocity

/// Two-component velocity in spectral form.
#[derive(Clone, Debug, PartialEq)]
pub struct Velocity {
    pub u1: SpectralField,
    pub u2: SpectralField,
}

impl Velocity {
    pub fn new(u1: SpectralField, u2: SpectralField) -> Result<Self> {
        u1.grid.ensure_same(&u2.grid)?;
        Ok(Self { u1, u2 })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            u1: SpectralField::zeros(grid),
            u2: SpectralField::zeros(grid),
        }
    }

    pub fn grid(&self) -> Grid {
        self.u1.grid
    }

    pub fn components(&self) -> [&SpectralField; 2] {
        [&self.u1, &self.u2]
    }

    pub fn divergence(&self) -> SpectralField {
        &self.u1.derivative(Axis::X1) + &self.u2.derivative(Axis::X2)
    }

    /// Scalar curl `∂₁u₂ − ∂₂u₁`.
    pub fn curl(&self) -> SpectralField {
        &self.u2.derivative(Axis::X1) - &self.u1.derivative(Axis::X2)
    }

    /// Entries `∂_i u_j` as `[[∂₁u₁, ∂₂u₁], [∂₁u₂, ∂₂u₂]]`.
    pub fn gradient(&self) -> [[SpectralField; 2]; 2] {
        [
            [self.u1.derivative(Axis::X1), self.u1.derivative(Axis::X2)],
            [self.u2.derivative(Axis::X1), self.u2.derivative(Axis::X2)],
        ]
    }

    pub fn to_physical(&self) -> Result<(RealField, RealField)> {
        to_physical_pair(&self.u1, &self.u2)
    }

    /// Sup over collocation points of the Euclidean speed.
    pub fn max_speed(&self) -> Result<f64> {
        let (a, b) = self.to_physical()?;
        Ok(magnitude(&[&a, &b])?.max_abs())
    }

    /// Error unless `‖div u‖_{L²} ≤ tol·(1 + ‖∇u‖_{L²})`.
    pub fn ensure_solenoidal(&self, tol: f64) -> Result<()> {
        let div = self.divergence().l2_norm();
        let g = self.gradient();
        let scale: f64 = g
            .iter()
            .flatten()
            .map(|c| c.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt();
        if div <= tol * (1.0 + scale) {
            Ok(())
        } else {
            Err(Error::NotSolenoidal { divergence: div })
        }
    }
}

/// Biot-Savart law: `ψ = Δ⁻¹ω`, `u = (−∂₂ψ, ∂₁ψ)`.
pub fn velocity_from_vorticity(omega: &SpectralField) -> Result<Velocity> {
    let psi = omega.invert_laplacian()?;
    Ok(Velocity {
        u1: -&psi.derivative(Axis::X2),
        u2: psi.derivative(Axis::X1),
    })
}

/// Dealiased advection `P_{k_c}(u·∇f)`.
pub fn advect(u: &Velocity, f: &SpectralField) -> Result<SpectralField> {
    u.grid().ensure_same(&f.grid())?;
    let (u1, u2) = u.to_physical()?;
    let (d1, d2) = to_physical_pair(&f.derivative(Axis::X1), &f.derivative(Axis::X2))?;
    Ok(advect_physical(&u1, &u2, &d1, &d2).to_spectral().dealias())
}

pub(crate) fn advect_physical(u1: &RealField, u2: &RealField, d1: &RealField, d2: &RealField) -> RealField {
    let samples = (0..u1.grid.len())
        .map(|i| u1.samples[i] * d1.samples[i] + u2.samples[i] * d2.samples[i])
        .collect();
    RealField::from_raw(u1.grid, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolant_extrema_between_grid_points() {
        let g = Grid::new(16).unwrap();
        // the max at x = (0.3, 1.1) is not a grid point
        let f = RealField::from_fn(g, |x, y| (x - 0.3).cos() * (y - 1.1).cos() + 0.2).unwrap().to_spectral();
        let (lo, hi) = f.extrema();
        assert!((hi - 1.2).abs() < 1e-13, "{hi}");
        assert!((lo + 0.8).abs() < 1e-13, "{lo}");
        assert!((f.evaluate(0.3, 1.1) - 1.2).abs() < 1e-13);
        let grid_max = f.to_physical().samples().iter().copied().fold(f64::MIN, f64::max);
        assert!(grid_max < 1.2 - 1e-4);
    }

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn max_diff(a: &RealField, b: &RealField) -> f64 {
        a.samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(4).is_err());
        assert!(Grid::new(9).is_err());
        let g = grid(64);
        assert_eq!(g.dealias_cutoff(), 21);
        assert_eq!(g.wavenumber(32), 32);
        assert_eq!(g.wavenumber(33), -31);
        assert_eq!(g.index_of(-1), Some(63));
        assert_eq!(g.index_of(-32), None);
        let g = grid(10);
        assert!(g.dealias_cutoff() < g.n() / 2);
    }

    #[test]
    fn zero_and_constant_transforms() {
        let g = grid(16);
        let zero = RealField::zeros(g).to_spectral();
        assert!(zero.is_zero());

        let three = RealField::from_fn(g, |_, _| 3.0).unwrap().to_spectral();
        assert!((three.coeff(0, 0).re - 3.0).abs() < 1e-15);
        for (i, _, _) in g.modes().skip(1) {
            assert!(three.coeffs()[i].norm() < 1e-15);
        }
    }

    #[test]
    fn cosine_has_two_half_coefficients() {
        let g = grid(32);
        let f = RealField::from_fn(g, |x1, _| x1.cos()).unwrap().to_spectral();
        for (i, k1, k2) in g.modes() {
            let expected = if k2 == 0 && k1.abs() == 1 { 0.5 } else { 0.0 };
            assert!((f.coeffs()[i] - Complex64::new(expected, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite_samples() {
        let g = grid(8);
        let mut s = vec![0.0; 64];
        s[5] = f64::NAN;
        assert!(matches!(RealField::new(g, s), Err(Error::NonFinite { index: 5 })));
    }

    #[test]
    fn derivative_of_modes() {
        let g = grid(32);
        let s = RealField::from_fn(g, |x1, _| x1.sin()).unwrap().to_spectral();
        let c = RealField::from_fn(g, |x1, _| x1.cos()).unwrap();
        assert!(max_diff(&s.derivative(Axis::X1).to_physical(), &c) < 1e-12);

        let konst = RealField::from_fn(g, |_, _| 2.5).unwrap().to_spectral();
        assert!(konst.derivative(Axis::X2).l2_norm() == 0.0);

        let f = RealField::from_fn(g, |x1, x2| (3.0 * x1 + 2.0 * x2).sin())
            .unwrap()
            .to_spectral();
        let want = RealField::from_fn(g, |x1, x2| 3.0 * (3.0 * x1 + 2.0 * x2).cos()).unwrap();
        assert!(max_diff(&f.derivative(Axis::X1).to_physical(), &want) < 1e-12);
    }

    #[test]
    fn derivative_zeroes_nyquist() {
        let g = grid(8);
        let f = SpectralField::from_modes(g, &[(4, 0, Complex64::new(1.0, 0.0))]).unwrap();
        assert!(f.derivative(Axis::X1).is_zero());
        // the other axis is untouched by the Nyquist rule
        let f = SpectralField::from_modes(g, &[(4, 1, Complex64::new(1.0, 0.0))]).unwrap();
        assert!(!f.derivative(Axis::X2).is_zero());
    }

    #[test]
    fn inverse_laplacian_examples() {
        let g = grid(32);
        let s = RealField::from_fn(g, |x1, _| x1.sin()).unwrap().to_spectral();
        let want = RealField::from_fn(g, |x1, _| -x1.sin()).unwrap();
        assert!(max_diff(&s.invert_laplacian().unwrap().to_physical(), &want) < 1e-14);

        assert!(SpectralField::zeros(g).invert_laplacian().unwrap().is_zero());

        let c = RealField::from_fn(g, |_, x2| (2.0 * x2).cos()).unwrap().to_spectral();
        let want = RealField::from_fn(g, |_, x2| -(2.0 * x2).cos() / 4.0).unwrap();
        assert!(max_diff(&c.invert_laplacian().unwrap().to_physical(), &want) < 1e-14);
    }

    #[test]
    fn inverse_laplacian_rejects_mean() {
        let g = grid(16);
        let f = RealField::from_fn(g, |x1, _| 0.25 + x1.sin()).unwrap().to_spectral();
        match f.invert_laplacian() {
            Err(Error::NonzeroMean { mean }) => assert!((mean - 0.25).abs() < 1e-14),
            other => panic!("expected NonzeroMean, got {other:?}"),
        }
        assert!(velocity_from_vorticity(&f).is_err());
    }

    #[test]
    fn biot_savart_examples() {
        let g = grid(32);
        let u = velocity_from_vorticity(&SpectralField::zeros(g)).unwrap();
        assert!(u.u1.is_zero() && u.u2.is_zero());

        let w = RealField::from_fn(g, |_, x2| x2.cos()).unwrap().to_spectral();
        let u = velocity_from_vorticity(&w).unwrap();
        let (u1, u2) = u.to_physical().unwrap();
        let want = RealField::from_fn(g, |_, x2| -x2.sin()).unwrap();
        assert!(max_diff(&u1, &want) < 1e-14);
        assert!(u2.max_abs() < 1e-14);

        let w = RealField::from_fn(g, |x1, _| x1.cos()).unwrap().to_spectral();
        let (u1, u2) = velocity_from_vorticity(&w).unwrap().to_physical().unwrap();
        let want = RealField::from_fn(g, |x1, _| x1.sin()).unwrap();
        assert!(u1.max_abs() < 1e-14);
        assert!(max_diff(&u2, &want) < 1e-14);
    }

    #[test]
    fn lebesgue_norm_examples() {
        let g = grid(64);
        let c = RealField::from_fn(g, |_, _| -1.5).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0, 7.0, f64::INFINITY] {
            assert!((c.lebesgue_norm(p).unwrap() - 1.5).abs() < 1e-14, "p = {p}");
        }
        let s = RealField::from_fn(g, |x1, _| x1.sin()).unwrap();
        assert!((s.lebesgue_norm(f64::INFINITY).unwrap() - 1.0).abs() < 1e-3);
        assert!((s.lebesgue_norm(2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!(matches!(s.lebesgue_norm(0.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn dealias_examples() {
        let g = grid(64);
        let one = Complex64::new(1.0, 0.0);
        let high = SpectralField::from_modes(g, &[(31, 0, one)]).unwrap();
        assert!(high.dealias().is_zero());
        let low = SpectralField::from_modes(g, &[(1, 1, one)]).unwrap();
        assert_eq!(low.dealias(), low);
        let d = high.dealias();
        assert_eq!(d.dealias(), d);
    }

    #[test]
    fn pair_transforms_match_single() {
        let g = grid(16);
        let f = RealField::from_fn(g, |x1, x2| (x1 + 2.0 * x2).sin() + 0.3).unwrap();
        let h = RealField::from_fn(g, |x1, x2| (3.0 * x1).cos() * x2.sin()).unwrap();
        let (fs, hs) = to_spectral_pair(&f, &h).unwrap();
        assert!(relative_l2_error(&fs, &f.to_spectral()) < 1e-14);
        assert!(relative_l2_error(&hs, &h.to_spectral()) < 1e-14);
        let (fp, hp) = to_physical_pair(&fs, &hs).unwrap();
        assert!(max_diff(&fp, &f) < 1e-14);
        assert!(max_diff(&hp, &h) < 1e-14);
    }

    #[test]
    fn mismatched_grids_error() {
        let a = SpectralField::zeros(grid(8));
        let b = SpectralField::zeros(grid(16));
        assert!(matches!(product(&a, &b), Err(Error::GridMismatch { left: 8, right: 16 })));
    }
}
