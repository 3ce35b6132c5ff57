//! Taming parameters and the taming function `g(r) = kappa (r - N)^+ / nu`.

use crate::error::{Error, Result};
use crate::field::SpectralField;

/// `(nu, kappa, N)` plus an optional reference field `U`.
///
/// The reference is `reference + reference_offset`, where the offset is a
/// spatially constant velocity carried outside the mean-zero coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TamingParams {
    pub nu: f64,
    pub kappa: f64,
    /// Threshold `N` on `||u - U||_inf^2`; `+inf` disables taming.
    pub threshold: f64,
    pub reference: Option<SpectralField>,
    pub reference_offset: [f64; 3],
}

impl TamingParams {
    pub fn new(nu: f64, kappa: f64, threshold: f64) -> Result<Self> {
        let p = Self { nu, kappa, threshold, reference: None, reference_offset: [0.0; 3] };
        p.validate()?;
        Ok(p)
    }

    /// Plain Navier-Stokes: the taming term never activates.
    pub fn untamed(nu: f64) -> Result<Self> {
        Self::new(nu, 1.0, f64::INFINITY)
    }

    pub fn with_reference(mut self, u: SpectralField) -> Self {
        self.reference = Some(u);
        self
    }

    pub fn with_reference_offset(mut self, v: [f64; 3]) -> Self {
        self.reference_offset = v;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        self.threshold = threshold;
        self.validate()?;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        self.kappa = kappa;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::Domain(format!("viscosity must be positive, got {}", self.nu)));
        }
        if !(self.kappa >= 1.0) || !self.kappa.is_finite() {
            return Err(Error::Domain(format!("kappa must be >= 1, got {}", self.kappa)));
        }
        if !(self.threshold >= 1.0) {
            return Err(Error::Domain(format!("threshold N must be >= 1, got {}", self.threshold)));
        }
        if self.reference_offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("reference offset must be finite".into()));
        }
        Ok(())
    }

    pub fn is_tamed(&self) -> bool {
        self.threshold.is_finite()
    }

    pub fn has_reference(&self) -> bool {
        self.reference.as_ref().is_some_and(|u| !u.is_zero()) || self.reference_offset != [0.0; 3]
    }

    /// Lipschitz constant `kappa / nu` of the taming function.
    pub fn lipschitz(&self) -> f64 {
        self.kappa / self.nu
    }
}

/// `g(r) = kappa (r - N) 1_{r >= N} / nu`.
pub fn taming_g(r: f64, p: &TamingParams) -> f64 {
    if r >= p.threshold {
        p.kappa * (r - p.threshold) / p.nu
    } else {
        0.0
    }
}
