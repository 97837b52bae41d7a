//! Seeded random band-limited fields.
//!
//! Modes are drawn in a fixed wave-vector order that does not depend on the
//! grid, so the same seed produces the same continuous field at every
//! resolution that can represent it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{velocity_from_vorticity, Grid, SpectralField, Velocity};

/// Spectral envelope of a random field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomSpectrum {
    /// Largest `max(|k1|, |k2|)` carrying energy.
    pub max_wavenumber: usize,
    /// Coefficient amplitudes decay like `(1 + |k|)^-decay`.
    pub decay: f64,
    /// Keep the `k = 0` mode at zero.
    pub zero_mean: bool,
}

impl RandomSpectrum {
    pub fn new(max_wavenumber: usize, decay: f64) -> Self {
        Self {
            max_wavenumber,
            decay,
            zero_mean: true,
        }
    }

    pub fn with_mean(mut self) -> Self {
        self.zero_mean = false;
        self
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draw a real field with random coefficients under `spectrum`.
pub fn band_limited<R: Rng>(grid: Grid, spectrum: RandomSpectrum, rng: &mut R) -> Result<SpectralField> {
    let kmax = spectrum.max_wavenumber as i64;
    if kmax > grid.dealias_cutoff() as i64 {
        return Err(Error::Precondition(format!(
            "random spectrum extends to k={kmax}, beyond the dealiasing cutoff {} of a {grid} grid",
            grid.dealias_cutoff()
        )));
    }
    let mut modes = Vec::new();
    // Half plane: k1 > 0, or k1 == 0 and k2 >= 0.
    for k1 in 0..=kmax {
        for k2 in -kmax..=kmax {
            if k1 == 0 && k2 < 0 {
                continue;
            }
            let re: f64 = rng.random_range(-1.0..1.0);
            let im: f64 = rng.random_range(-1.0..1.0);
            if k1 == 0 && k2 == 0 && spectrum.zero_mean {
                continue;
            }
            let r = ((k1 * k1 + k2 * k2) as f64).sqrt();
            let amp = (1.0 + r).powf(-spectrum.decay);
            let c = if k1 == 0 && k2 == 0 {
                Complex64::new(re * amp, 0.0)
            } else {
                // from_modes halves non-zero modes; double to keep |ĉ_k| = amp
                Complex64::new(re, im) * (2.0 * amp)
            };
            modes.push((k1, k2, c));
        }
    }
    SpectralField::from_modes(grid, &modes)
}

/// Random divergence-free velocity with its (zero-mean) vorticity.
pub fn solenoidal<R: Rng>(grid: Grid, spectrum: RandomSpectrum, rng: &mut R) -> Result<(Velocity, SpectralField)> {
    let mut spectrum = spectrum;
    spectrum.zero_mean = true;
    let omega = band_limited(grid, spectrum, rng)?;
    let u = velocity_from_vorticity(&omega)?;
    Ok((u, omega))
}
