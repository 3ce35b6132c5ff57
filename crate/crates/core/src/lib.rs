//! Pseudospectral solver and verification harness for the tamed 3D
//! Navier-Stokes equation
//!
//! ```text
//! du/dt = -nu A u + B(u, u) - g(||u - U||_inf^2) (u - U),   g(r) = kappa (r - N)^+ / nu
//! ```
//!
//! on the periodic torus restricted to mean-zero divergence-free fields.
//!
//! * [`basis`], [`field`], [`operators`], [`norms`]: the Stokes operator in
//!   spectral form and its functional calculus.
//! * [`taming`], [`nonlinear`]: the tamed right-hand side.
//! * [`integrate`]: exponential time differencing and the Picard scheme over
//!   linearized equations.
//! * [`diagnostics`], [`attractor`]: numerical certification of the a priori
//!   estimates, symmetries, absorbing balls and tail compactness.
//! * [`oracle`]: an FFT-free reference path used for cross-validation.

pub mod attractor;
pub mod basis;
pub mod checkpoint;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod field;
pub mod integrate;
pub mod io;
pub mod nonlinear;
pub mod norms;
pub mod operators;
pub mod oracle;
pub mod presets;
pub mod stats;
pub mod suite;
pub mod taming;

pub use basis::{GridField, ModeId, RealizationKind, StokesBasis, TorusParams};
pub use error::{Error, Result};
pub use field::SpectralField;
pub use integrate::{run, SolverConfig, StepMode, Trajectory};
pub use norms::{norm, NormKind};
pub use taming::{taming_g, TamingParams};

#[cfg(test)]
pub(crate) mod testutil {
    use std::sync::Arc;

    use crate::basis::StokesBasis;
    use crate::field::SpectralField;

    pub fn random_field(basis: &Arc<StokesBasis>, seed: u64, h1: f64) -> SpectralField {
        crate::presets::random_spectrum(basis, seed, 1.0, h1).unwrap()
    }
}
