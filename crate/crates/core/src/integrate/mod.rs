//! Time integration of the tamed equation.
//!
//! The stiff linear part `-nu A` (plus the advection by a constant mean flow,
//! when one is carried) is propagated exactly; the advection and taming terms
//! enter through the `phi` functions of exponential time differencing. The
//! Picard scheme solves a sequence of linear problems with the previous
//! iterate frozen in the advecting velocity and the taming coefficient.

mod etd;
mod picard;
mod trajectory;

pub use etd::{phi1, phi2};
pub use picard::{picard_solve, picard_sweep, PicardOutcome};
pub use trajectory::{Trajectory, CSV_HEADER};

use std::str::FromStr;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::nonlinear::AdvectionForm;
use crate::taming::TamingParams;

pub(crate) use etd::{Dynamics, EtdCoeffs};
pub(crate) use trajectory::Recorder;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Etd1,
    Etd2,
    Picard,
}

impl StepMode {
    /// Nominal order of accuracy.
    pub fn order(self) -> u32 {
        match self {
            StepMode::Etd1 => 1,
            StepMode::Etd2 | StepMode::Picard => 2,
        }
    }
}

impl FromStr for StepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "etd1" => Ok(StepMode::Etd1),
            "etd2" => Ok(StepMode::Etd2),
            "picard" => Ok(StepMode::Picard),
            _ => Err(Error::Config(format!("unknown step mode '{s}' (expected etd1, etd2 or picard)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtControl {
    Fixed,
    /// `dt <= cfl * h / ||u||_sup`, with `h` the grid spacing.
    Cfl(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub horizon: f64,
    pub mode: StepMode,
    /// Tolerance on `sup_t ||u_k - u_{k-1}||_{H1}` for the Picard scheme.
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Picard iteration is restarted on windows of this length.
    pub picard_window: Option<f64>,
    /// Observables are recorded every `cadence` steps and at the final time.
    pub cadence: usize,
    pub dt_control: DtControl,
    pub advection: AdvectionForm,
    /// Constant velocity carried outside the mean-zero coefficients.
    pub mean_flow: [f64; 3],
    pub keep_states: bool,
    /// Abort once `||u - U||_sup^2` exceeds this multiple of `N`.
    pub blowup_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 1.0,
            mode: StepMode::Etd2,
            picard_tol: 1e-8,
            picard_max_iter: 15,
            picard_window: None,
            cadence: 1,
            dt_control: DtControl::Fixed,
            advection: AdvectionForm::Convective,
            mean_flow: [0.0; 3],
            keep_states: true,
            blowup_factor: 1e6,
        }
    }
}

impl SolverConfig {
    pub fn new(dt: f64, horizon: f64, mode: StepMode) -> Self {
        Self { dt, horizon, mode, ..Self::default() }
    }

    pub fn with_cadence(mut self, cadence: usize) -> Self {
        self.cadence = cadence;
        self
    }

    pub fn with_mean_flow(mut self, v: [f64; 3]) -> Self {
        self.mean_flow = v;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be finite and nonnegative, got {}", self.horizon)));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config(format!("picard_tol must be positive, got {}", self.picard_tol)));
        }
        if self.picard_max_iter < 1 {
            return Err(Error::Config("picard_max_iter must be at least 1".into()));
        }
        if let Some(w) = self.picard_window {
            if !(w > 0.0) {
                return Err(Error::Config(format!("picard window must be positive, got {w}")));
            }
        }
        if self.cadence < 1 {
            return Err(Error::Config("cadence must be at least 1".into()));
        }
        if let DtControl::Cfl(c) = self.dt_control {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("cfl number must be positive, got {c}")));
            }
            if self.mode == StepMode::Picard {
                return Err(Error::Config("the Picard scheme needs a fixed time step".into()));
            }
        }
        if self.mean_flow.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("mean flow must be finite".into()));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::Config("blow-up factor must exceed 1".into()));
        }
        Ok(())
    }

    /// Fixed-step time grid `0, dt, 2 dt, ..., T`; the last step is shortened
    /// when `T` is not a multiple of `dt`.
    pub fn time_grid(&self) -> Vec<f64> {
        time_grid(self.dt, self.horizon)
    }
}

pub(crate) fn time_grid(dt: f64, horizon: f64) -> Vec<f64> {
    let steps = ((horizon / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut t: Vec<f64> = (0..=steps).map(|m| (m as f64 * dt).min(horizon)).collect();
    if let Some(last) = t.last_mut() {
        *last = horizon;
    }
    t.dedup();
    t
}

fn check_inputs(u0: &SpectralField, p: &TamingParams, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    p.validate()?;
    if let Some(r) = &p.reference {
        u0.ensure_compatible(r)?;
    }
    if cfg.mean_flow != p.reference_offset {
        return Err(Error::Config(format!(
            "mean flow {:?} must equal the constant part of the reference field {:?}",
            cfg.mean_flow, p.reference_offset
        )));
    }
    if cfg.mean_flow != [0.0; 3] {
        u0.basis().torus_basis()?;
    }
    if !u0.is_finite() {
        return Err(Error::Domain("initial state is not finite".into()));
    }
    Ok(())
}

/// Integrate from `u0` over `[0, cfg.horizon]`.
pub fn run(u0: &SpectralField, p: &TamingParams, cfg: &SolverConfig) -> Result<Trajectory> {
    check_inputs(u0, p, cfg)?;
    match cfg.mode {
        StepMode::Etd1 | StepMode::Etd2 => etd::run_etd(u0, p, cfg),
        StepMode::Picard => Ok(picard_solve(u0, p, cfg, cfg.horizon)?.trajectory),
    }
}

/// A single exponential step of size `dt` with convective advection.
pub fn etd_step(u: &SpectralField, p: &TamingParams, dt: f64, mode: StepMode) -> Result<SpectralField> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let dynamics = Dynamics::new(p, AdvectionForm::Convective, p.reference_offset);
    let lin = dynamics.linear_symbols(u.basis())?;
    let c = EtdCoeffs::new(&lin, dt);
    let e0 = dynamics.eval(u)?;
    match mode {
        StepMode::Etd1 => Ok(c.etd1(u, &e0.n)),
        StepMode::Etd2 => {
            let a = c.etd1(u, &e0.n);
            let ea = dynamics.eval(&a)?;
            Ok(c.etd2_correct(&a, &e0.n, &ea.n))
        }
        StepMode::Picard => Err(Error::Config("etd_step supports etd1 and etd2 only".into())),
    }
}

pub(crate) fn lincomb(a: &[Complex64], x: &[Complex64], b: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(x).zip(b.iter().zip(y)).map(|((a, x), (b, y))| a * x + b * y).collect()
}

#[cfg(test)]
mod tests;
