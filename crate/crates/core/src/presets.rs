//! Named initial conditions.

use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::basis::{GridField, StokesBasis};
use crate::checkpoint;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::norms::{norm, NormKind};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Zero,
    SingleMode { wavevector: [i32; 3], polarization: u8, amplitude: f64 },
    /// `a (sin x cos y cos z, -cos x sin y cos z, 0)` in units of `2 pi / L`.
    TaylorGreen { amplitude: f64 },
    /// Gaussian coefficients with `|c| ~ lambda^{-slope/2}`, rescaled to `||u||_{H1} = h1`.
    Random { seed: u64, slope: f64, h1: f64 },
    Checkpoint(PathBuf),
}

impl InitialCondition {
    pub fn build(&self, basis: &Arc<StokesBasis>) -> Result<SpectralField> {
        match self {
            InitialCondition::Zero => Ok(SpectralField::zeros(basis)),
            InitialCondition::SingleMode { wavevector, polarization, amplitude } => {
                SpectralField::single_mode(basis, *wavevector, *polarization, Complex64::new(*amplitude, 0.0))
            }
            InitialCondition::TaylorGreen { amplitude } => taylor_green(basis, *amplitude),
            InitialCondition::Random { seed, slope, h1 } => random_spectrum(basis, *seed, *slope, *h1),
            InitialCondition::Checkpoint(path) => checkpoint::load_path(path, Some(basis)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::Zero => "zero",
            InitialCondition::SingleMode { .. } => "single-mode",
            InitialCondition::TaylorGreen { .. } => "taylor-green",
            InitialCondition::Random { .. } => "random",
            InitialCondition::Checkpoint(_) => "checkpoint",
        }
    }
}

pub fn taylor_green(basis: &Arc<StokesBasis>, amplitude: f64) -> Result<SpectralField> {
    let t = basis.torus_basis()?;
    let p = t.params();
    let s = 2.0 * std::f64::consts::PI / p.length;
    let g = GridField::from_fn(p.n, p.length, |x| {
        let (a, b, c) = (s * x[0], s * x[1], s * x[2]);
        [amplitude * a.sin() * b.cos() * c.cos(), -amplitude * a.cos() * b.sin() * c.cos(), 0.0]
    });
    SpectralField::from_grid(basis, &g)
}

/// Random field with power-law coefficient envelope, normalized in H1.
pub fn random_spectrum(basis: &Arc<StokesBasis>, seed: u64, slope: f64, h1: f64) -> Result<SpectralField> {
    if !(h1 >= 0.0) || !h1.is_finite() {
        return Err(Error::Domain(format!("target H1 norm must be finite and nonnegative, got {h1}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<Complex64> = basis
        .eigenvalues()
        .iter()
        .map(|&l| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * (l.powf(-slope / 2.0) / 2f64.sqrt())
        })
        .collect();
    let u = SpectralField::from_coeffs(basis, coeffs)?;
    let current = norm(&u, NormKind::H1)?;
    if h1 == 0.0 || current == 0.0 {
        return Ok(SpectralField::zeros(basis));
    }
    Ok(u.scale(h1 / current))
}
