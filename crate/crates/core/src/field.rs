//! Divergence-free, mean-zero velocity fields stored as mode coefficients.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;

use crate::basis::{is_canonical, GridField, StokesBasis};
use crate::error::{Error, Result};

/// A velocity field as complex coefficients in a [`StokesBasis`].
///
/// Oversampled grid samples are cached on first use and dropped whenever
/// the coefficients are mutated.
#[derive(Debug, Clone)]
pub struct SpectralField {
    basis: Arc<StokesBasis>,
    coeffs: Vec<Complex64>,
    fine: OnceLock<Arc<GridField>>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.basis.compatible(&other.basis) && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(basis: &Arc<StokesBasis>) -> Self {
        Self::from_coeffs(basis, vec![Complex64::default(); basis.len()]).expect("length matches")
    }

    pub fn from_coeffs(basis: &Arc<StokesBasis>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Structural(format!(
                "coefficient vector has length {} but the basis has {} modes",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(Self { basis: basis.clone(), coeffs, fine: OnceLock::new() })
    }

    /// The basis function `e_j` (unit coefficient on mode `j`).
    pub fn unit(basis: &Arc<StokesBasis>, j: usize) -> Result<Self> {
        if j >= basis.len() {
            return Err(Error::Domain(format!("mode index {j} out of range")));
        }
        let mut f = Self::zeros(basis);
        f.coeffs[j] = Complex64::new(1.0, 0.0);
        Ok(f)
    }

    /// Single torus mode with the given wavevector, polarization and coefficient.
    pub fn single_mode(
        basis: &Arc<StokesBasis>,
        wavevector: [i32; 3],
        polarization: u8,
        value: Complex64,
    ) -> Result<Self> {
        let (m, value) = if is_canonical(wavevector) {
            (wavevector, value)
        } else {
            // -m carries the conjugate coefficient on the same polarization
            ([-wavevector[0], -wavevector[1], -wavevector[2]], value.conj())
        };
        let t = basis.torus_basis()?;
        let w = t
            .wavevector_index(m)
            .ok_or_else(|| Error::Domain(format!("wavevector {wavevector:?} is not retained")))?;
        let mut f = Self::zeros(basis);
        f.coeffs[2 * w + polarization.min(1) as usize] = value;
        Ok(f)
    }

    /// Leray-project grid samples into the torus basis.
    pub fn from_grid(basis: &Arc<StokesBasis>, grid: &GridField) -> Result<Self> {
        let coeffs = basis.torus_basis()?.project_grid(grid)?;
        Self::from_coeffs(basis, coeffs)
    }

    pub fn basis(&self) -> &Arc<StokesBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Mutable access; invalidates the cached grid samples.
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        self.fine = OnceLock::new();
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn ensure_compatible(&self, other: &SpectralField) -> Result<()> {
        if self.basis.compatible(&other.basis) {
            Ok(())
        } else {
            Err(Error::Structural("fields live in different bases".into()))
        }
    }

    /// Build a field with the same basis from new coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), self.coeffs.len());
        Self { basis: self.basis.clone(), coeffs, fine: OnceLock::new() }
    }

    pub fn map_modes(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        self.with_coeffs(self.coeffs.iter().enumerate().map(|(j, &c)| f(j, c)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_modes(|_, c| c * s)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Result<Self> {
        self.ensure_compatible(other)?;
        Ok(self.with_coeffs(self.coeffs.iter().zip(&other.coeffs).map(|(&x, &y)| x + y * a).collect()))
    }

    /// Real L2 inner product `<self, other>`.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.ensure_compatible(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a.conj() * b).re).sum())
    }

    /// Largest coefficient difference in absolute value.
    pub fn max_abs_diff(&self, other: &SpectralField) -> Result<f64> {
        self.ensure_compatible(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Samples on the collocation grid.
    pub fn grid_samples(&self) -> Result<GridField> {
        let t = self.basis.torus_basis()?;
        t.synthesize(&self.coeffs, t.params().n)
    }

    /// Samples on the oversampled grid; cached.
    pub fn fine_samples(&self) -> Result<Arc<GridField>> {
        if let Some(g) = self.fine.get() {
            return Ok(g.clone());
        }
        let t = self.basis.torus_basis()?;
        let g = Arc::new(t.synthesize(&self.coeffs, t.fine().size())?);
        Ok(self.fine.get_or_init(|| g).clone())
    }

    /// Divergence-free check: largest `|k . u_hat(k)| / |k| |u_hat|` over retained modes.
    /// Zero by construction on the torus, kept as a structural self-check.
    pub fn divergence_residual(&self) -> Result<f64> {
        let t = self.basis.torus_basis()?;
        let mut worst: f64 = 0.0;
        for (w, wv) in t.wavevectors().iter().enumerate() {
            let v = t.vector_coefficient(w, &self.coeffs);
            let div = v[0] * wv.k[0] + v[1] * wv.k[1] + v[2] * wv.k[2];
            let mag = (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt() * wv.lambda.sqrt();
            if mag > 0.0 {
                worst = worst.max(div.norm() / mag);
            }
        }
        Ok(worst)
    }

    /// Ambient coordinates `Q c` of a manufactured-basis field.
    pub fn ambient(&self) -> Result<Vec<Complex64>> {
        let m = self.basis.manufactured_basis()?;
        let q = m.eigenvectors();
        let d = self.coeffs.len();
        Ok((0..d).map(|i| (0..d).map(|j| self.coeffs[j] * q[(i, j)]).sum()).collect())
    }
}

impl Add<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(1.0, rhs).expect("incompatible bases")
    }
}

impl Sub<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(-1.0, rhs).expect("incompatible bases")
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}
