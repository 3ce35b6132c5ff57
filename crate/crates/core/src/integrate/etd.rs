use std::sync::Arc;

use rustfft::num_complex::Complex64;

use super::{lincomb, DtControl, Recorder, SolverConfig, StepMode, Trajectory};
use crate::basis::StokesBasis;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::nonlinear::{bilinear_b_with, deviation, taming_argument, AdvectionForm};
use crate::norms::{norm, NormKind};
use crate::taming::{taming_g, TamingParams};

// below this modulus the phi functions switch to their Taylor series
const SERIES_RADIUS: f64 = 0.1;
const SERIES_TERMS: usize = 20;

/// `phi1(z) = (e^z - 1) / z`.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_RADIUS {
        series(z, 1)
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `phi2(z) = (e^z - 1 - z) / z^2`.
pub fn phi2(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_RADIUS {
        series(z, 2)
    } else {
        (z.exp() - 1.0 - z) / (z * z)
    }
}

// sum_j z^j / (j + k)!
fn series(z: Complex64, k: usize) -> Complex64 {
    let mut term = Complex64::new(1.0 / (1..=k).product::<usize>() as f64, 0.0);
    let mut sum = term;
    for j in 1..SERIES_TERMS {
        term = term * z / (j + k) as f64;
        sum += term;
    }
    sum
}

/// Exponential and `h phi_j` multipliers for one step size.
#[derive(Debug, Clone)]
pub(crate) struct EtdCoeffs {
    pub h: f64,
    e: Vec<Complex64>,
    p1: Vec<Complex64>,
    p2: Vec<Complex64>,
}

impl EtdCoeffs {
    pub fn new(lin: &[Complex64], h: f64) -> Self {
        let mut e = Vec::with_capacity(lin.len());
        let mut p1 = Vec::with_capacity(lin.len());
        let mut p2 = Vec::with_capacity(lin.len());
        for &l in lin {
            let z = l * h;
            e.push(z.exp());
            p1.push(phi1(z) * h);
            p2.push(phi2(z) * h);
        }
        Self { h, e, p1, p2 }
    }

    /// `e^{hL} u + h phi1(hL) n`.
    pub fn etd1(&self, u: &SpectralField, n: &SpectralField) -> SpectralField {
        u.with_coeffs(lincomb(&self.e, u.coeffs(), &self.p1, n.coeffs()))
    }

    /// `a + h phi2(hL) (n_a - n_0)`.
    pub fn etd2_correct(&self, a: &SpectralField, n0: &SpectralField, na: &SpectralField) -> SpectralField {
        let c = a
            .coeffs()
            .iter()
            .zip(&self.p2)
            .zip(n0.coeffs().iter().zip(na.coeffs()))
            .map(|((a, p), (x, y))| a + p * (y - x))
            .collect();
        a.with_coeffs(c)
    }
}

/// Nonlinear part of the right-hand side together with its taming data.
pub(crate) struct Eval {
    pub n: SpectralField,
    pub g: f64,
    pub sup_sq: f64,
}

pub(crate) struct Dynamics<'a> {
    pub p: &'a TamingParams,
    pub form: AdvectionForm,
    pub mean_flow: [f64; 3],
}

impl<'a> Dynamics<'a> {
    pub fn new(p: &'a TamingParams, form: AdvectionForm, mean_flow: [f64; 3]) -> Self {
        Self { p, form, mean_flow }
    }

    /// Diagonal symbol of the linear part: `-nu lambda - i k.b`.
    pub fn linear_symbols(&self, basis: &Arc<StokesBasis>) -> Result<Vec<Complex64>> {
        let nu = self.p.nu;
        if self.mean_flow == [0.0; 3] {
            return Ok(basis.eigenvalues().iter().map(|&l| Complex64::new(-nu * l, 0.0)).collect());
        }
        let t = basis.torus_basis()?;
        let b = self.mean_flow;
        Ok(basis
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(j, &l)| {
                let k = t.wavevectors()[j / 2].k;
                Complex64::new(-nu * l, -(k[0] * b[0] + k[1] * b[1] + k[2] * b[2]))
            })
            .collect())
    }

    /// `||u - U||_sup^2` and `g` at that value.
    pub fn taming(&self, u: &SpectralField) -> Result<(f64, f64)> {
        let sup_sq = taming_argument(u, self.mean_flow, self.p)?;
        Ok((sup_sq, taming_g(sup_sq, self.p)))
    }

    pub fn eval(&self, u: &SpectralField) -> Result<Eval> {
        let (sup_sq, g) = self.taming(u)?;
        let adv = bilinear_b_with(u, u, self.form)?;
        let n = if g > 0.0 { adv.axpy(-g, &deviation(u, self.p))? } else { adv };
        Ok(Eval { n, g, sup_sq })
    }

    /// `B(v, w) - g (w - U)` with `v` and `g` frozen.
    pub fn eval_frozen(&self, v: &SpectralField, g: f64, w: &SpectralField) -> Result<SpectralField> {
        let adv = bilinear_b_with(v, w, self.form)?;
        if g > 0.0 {
            adv.axpy(-g, &deviation(w, self.p))
        } else {
            Ok(adv)
        }
    }

    pub fn blowup_limit(&self, cfg: &SolverConfig) -> f64 {
        cfg.blowup_factor * self.p.threshold
    }

    /// `||u||_sup` of the mean-zero part.
    pub fn observed_sup(&self, u: &SpectralField, sup_sq: f64) -> Result<f64> {
        if self.p.reference.is_none() {
            Ok(sup_sq.sqrt())
        } else {
            norm(u, NormKind::Sup)
        }
    }
}

pub(crate) fn check_finite(u: &SpectralField, sup_sq: f64, limit: f64, t_last: f64) -> Result<()> {
    if !u.is_finite() || !sup_sq.is_finite() {
        return Err(Error::BlowUp { last_finite_time: t_last, reason: "non-finite state".into() });
    }
    if sup_sq > limit {
        return Err(Error::BlowUp {
            last_finite_time: t_last,
            reason: format!("sup-norm squared {sup_sq:e} exceeds the abort limit {limit:e}"),
        });
    }
    Ok(())
}

pub(crate) fn run_etd(u0: &SpectralField, p: &TamingParams, cfg: &SolverConfig) -> Result<Trajectory> {
    let dynamics = Dynamics::new(p, cfg.advection, cfg.mean_flow);
    let lin = dynamics.linear_symbols(u0.basis())?;
    let limit = dynamics.blowup_limit(cfg);
    let mut rec = Recorder::new(p.nu, cfg.cadence, cfg.keep_states);
    let grid = match cfg.dt_control {
        DtControl::Fixed => Some(cfg.time_grid()),
        DtControl::Cfl(_) => None,
    };
    let spacing = match cfg.dt_control {
        DtControl::Cfl(_) => u0.basis().torus_basis()?.spacing(),
        DtControl::Fixed => 0.0,
    };
    let drift = cfg.mean_flow.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut cache: Option<EtdCoeffs> = None;
    let mut u = u0.clone();
    let mut t = 0.0;
    let mut m = 0usize;
    let mut e = dynamics.eval(&u)?;
    check_finite(&u, e.sup_sq, limit, 0.0)?;
    loop {
        let sup = dynamics.observed_sup(&u, e.sup_sq)?;
        rec.push(t, &u, sup, e.g);
        let h = match (&grid, cfg.dt_control) {
            (Some(g), _) => match g.get(m + 1) {
                Some(&next) => next - g[m],
                None => break,
            },
            (None, DtControl::Cfl(cfl)) => {
                let remaining = cfg.horizon - t;
                if remaining <= 1e-12 * cfg.horizon.max(1.0) {
                    break;
                }
                let speed = sup + drift;
                let h = if speed > 0.0 { cfg.dt.min(cfl * spacing / speed) } else { cfg.dt };
                if h >= remaining { remaining } else { h }
            }
            (None, DtControl::Fixed) => unreachable!(),
        };
        if cache.as_ref().is_none_or(|c| c.h.to_bits() != h.to_bits()) {
            cache = Some(EtdCoeffs::new(&lin, h));
        }
        let c = cache.as_ref().expect("coefficients cached above");
        let a = c.etd1(&u, &e.n);
        let next = match cfg.mode {
            StepMode::Etd1 => a,
            _ => {
                let ea = dynamics.eval(&a)?;
                check_finite(&a, ea.sup_sq, limit, t)?;
                c.etd2_correct(&a, &e.n, &ea.n)
            }
        };
        let en = dynamics.eval(&next)?;
        check_finite(&next, en.sup_sq, limit, t)?;
        m += 1;
        t = match &grid {
            Some(g) => g[m],
            None => {
                let tn = t + h;
                if cfg.horizon - tn <= 1e-12 * cfg.horizon.max(1.0) { cfg.horizon } else { tn }
            }
        };
        u = next;
        e = en;
    }
    Ok(rec.finish())
}
