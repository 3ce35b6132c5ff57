//! Functional calculus of the Stokes operator: `A`, `A^alpha`, `exp(-tA)`,
//! Leray projection and Galerkin projections.

use std::sync::Arc;

use crate::basis::{GridField, StokesBasis};
use crate::error::{Error, Result};
use crate::field::SpectralField;

/// `A u`: multiply each coefficient by its eigenvalue.
pub fn apply_a(u: &SpectralField) -> SpectralField {
    let ev = u.basis().eigenvalues();
    u.map_modes(|j, c| c * ev[j])
}

/// `A^alpha u` for `alpha in [-1, 1]`.
pub fn apply_a_pow(alpha: f64, u: &SpectralField) -> Result<SpectralField> {
    if !(-1.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("fractional power {alpha} outside [-1, 1]")));
    }
    if alpha == 0.0 {
        return Ok(u.clone());
    }
    if alpha == 1.0 {
        return Ok(apply_a(u));
    }
    let ev = u.basis().eigenvalues();
    Ok(u.map_modes(|j, c| c * ev[j].powf(alpha)))
}

/// `exp(-tA) u` for `t >= 0`.
pub fn apply_semigroup(t: f64, u: &SpectralField) -> Result<SpectralField> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("semigroup time must be finite and nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    let ev = u.basis().eigenvalues();
    Ok(u.map_modes(|j, c| c * (-t * ev[j]).exp()))
}

/// Leray projection of real grid samples onto the divergence-free,
/// mean-zero retained modes of a torus basis (per-mode `I - k k^T / |k|^2`).
pub fn leray_project(basis: &Arc<StokesBasis>, v: &GridField) -> Result<SpectralField> {
    SpectralField::from_grid(basis, v)
}

/// `Pi_n u` (or `u - Pi_n u` with `complement`), keeping the `n` lowest modes
/// in basis order.
pub fn galerkin_project(n: usize, u: &SpectralField, complement: bool) -> Result<SpectralField> {
    if n > u.len() {
        return Err(Error::Domain(format!("mode count {n} exceeds basis size {}", u.len())));
    }
    Ok(u.map_modes(|j, c| if (j < n) != complement { c } else { Default::default() }))
}
