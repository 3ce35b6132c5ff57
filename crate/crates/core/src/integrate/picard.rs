use super::etd::{check_finite, Dynamics, EtdCoeffs};
use super::trajectory::trapezoid;
use super::{check_inputs, time_grid, Recorder, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::nonlinear::AdvectionForm;
use crate::norms::weighted_sq;
use crate::taming::TamingParams;

/// Result of the Picard scheme.
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub trajectory: Trajectory,
    /// Index of the accepted iterate (the zero iterate is number 1), maximised
    /// over restart windows.
    pub iterations: usize,
    /// `sup_t ||u_k - u_{k-1}||_{H1}` for each iterate of the last window.
    pub increments: Vec<f64>,
    /// Worst slack of `||u_k||^2 + 2 nu int ||grad u_k||^2 <= ||u_0||^2` over
    /// all iterates; `None` when a reference field makes it inapplicable.
    pub energy_margin: Option<f64>,
    /// Worst slack of the iterate gradient bound; `None` when untamed.
    pub gradient_margin: Option<f64>,
}

/// One linear solve: integrate `dw/dt = -nu A w + B(v, w) - g(||v - U||^2)(w - U)`
/// from `w(t_0) = u0` with `v = frozen[m]` at `times[m]`, by ETD2 with the
/// coefficients frozen at the step ends.
pub fn picard_sweep(
    u0: &SpectralField,
    frozen: &[SpectralField],
    times: &[f64],
    p: &TamingParams,
    form: AdvectionForm,
) -> Result<Vec<SpectralField>> {
    if frozen.len() != times.len() || times.is_empty() {
        return Err(Error::Structural(format!(
            "frozen iterate has {} states for {} times",
            frozen.len(),
            times.len()
        )));
    }
    let dynamics = Dynamics::new(p, form, p.reference_offset);
    let lin = dynamics.linear_symbols(u0.basis())?;
    let g: Vec<f64> = frozen.iter().map(|v| dynamics.taming(v).map(|x| x.1)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(times.len());
    out.push(u0.clone());
    let mut cache: Option<EtdCoeffs> = None;
    for m in 0..times.len() - 1 {
        let h = times[m + 1] - times[m];
        if cache.as_ref().is_none_or(|c| c.h.to_bits() != h.to_bits()) {
            cache = Some(EtdCoeffs::new(&lin, h));
        }
        let c = cache.as_ref().expect("coefficients cached above");
        let w = &out[m];
        let n0 = dynamics.eval_frozen(&frozen[m], g[m], w)?;
        let a = c.etd1(w, &n0);
        let na = dynamics.eval_frozen(&frozen[m + 1], g[m + 1], &a)?;
        let next = c.etd2_correct(&a, &n0, &na);
        if !next.is_finite() {
            return Err(Error::BlowUp { last_finite_time: times[m], reason: "non-finite Picard iterate".into() });
        }
        out.push(next);
    }
    Ok(out)
}

struct BoundSlack {
    energy: f64,
    gradient: f64,
}

// slack of the discrete iterate bounds along one iterate
fn iterate_bounds(times: &[f64], w: &[SpectralField], p: &TamingParams) -> BoundSlack {
    let e: Vec<f64> = w.iter().map(|u| weighted_sq(u, 0)).collect();
    let f1: Vec<f64> = w.iter().map(|u| weighted_sq(u, 1)).collect();
    let f2: Vec<f64> = w.iter().map(|u| weighted_sq(u, 2)).collect();
    let (q1, err1) = trapezoid(times, &f1);
    let (q2, err2) = trapezoid(times, &f2);
    let nu = p.nu;
    let mut slack = BoundSlack { energy: f64::INFINITY, gradient: f64::INFINITY };
    let rhs_e = e[0];
    let rhs_g = if p.is_tamed() { p.kappa * p.threshold / (nu * nu) * e[0] + f1[0] } else { f64::INFINITY };
    for m in 0..times.len() {
        let tol_e = 2.0 * 2.0 * nu * err1[m] + 1e-12 * rhs_e;
        slack.energy = slack.energy.min(rhs_e + tol_e - (e[m] + 2.0 * nu * q1[m]));
        let tol_g = 2.0 * nu * err2[m] + 1e-12 * rhs_g;
        slack.gradient = slack.gradient.min(rhs_g + tol_g - (f1[m] + nu * q2[m]));
    }
    slack
}

/// Picard iteration for the tamed equation over `[0, horizon]`.
///
/// Iterates start from `u_1 = 0`; each subsequent iterate solves a linear
/// problem with the previous one frozen. Iteration stops once the
/// `H1` increment drops below `cfg.picard_tol`. With `cfg.picard_window`
/// set, the horizon is split and the scheme restarted from each window's
/// terminal state.
pub fn picard_solve(
    u0: &SpectralField,
    p: &TamingParams,
    cfg: &SolverConfig,
    horizon: f64,
) -> Result<PicardOutcome> {
    let cfg = SolverConfig { horizon, ..cfg.clone() };
    check_inputs(u0, p, &cfg)?;
    let grid = time_grid(cfg.dt, horizon);
    let per_window = match cfg.picard_window {
        Some(w) => ((w / cfg.dt).round() as usize).max(1),
        None => grid.len().max(2) - 1,
    };
    let check_energy = p.reference.is_none();
    let mut states: Vec<SpectralField> = vec![u0.clone()];
    let mut iterations = 0;
    let mut increments = Vec::new();
    let mut energy_margin = f64::INFINITY;
    let mut gradient_margin = f64::INFINITY;
    let mut start = 0;
    while start + 1 < grid.len() {
        let end = (start + per_window).min(grid.len() - 1);
        let times = &grid[start..=end];
        let w0 = states.last().expect("at least the initial state").clone();
        let mut prev = vec![SpectralField::zeros(u0.basis()); times.len()];
        increments.clear();
        let mut converged = false;
        for k in 2..=cfg.picard_max_iter {
            let w = picard_sweep(&w0, &prev, times, p, cfg.advection)?;
            let inc = w
                .iter()
                .zip(&prev)
                .map(|(a, b)| weighted_sq(&(a - b), 1).sqrt())
                .fold(0.0, f64::max);
            let slack = iterate_bounds(times, &w, p);
            if check_energy && slack.energy < 0.0 {
                return Err(Error::BoundViolated(format!(
                    "Picard iterate {k} violates the energy bound by {:e}",
                    -slack.energy
                )));
            }
            if check_energy && slack.gradient < 0.0 {
                return Err(Error::BoundViolated(format!(
                    "Picard iterate {k} violates the gradient bound by {:e}",
                    -slack.gradient
                )));
            }
            energy_margin = energy_margin.min(slack.energy);
            gradient_margin = gradient_margin.min(slack.gradient);
            increments.push(inc);
            log::debug!("picard window [{}, {}] iterate {k}: increment {inc:e}", times[0], times[times.len() - 1]);
            prev = w;
            if inc < cfg.picard_tol {
                iterations = iterations.max(k);
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: cfg.picard_max_iter,
                last_increment: increments.last().copied().unwrap_or(f64::NAN),
            });
        }
        states.extend(prev.into_iter().skip(1));
        start = end;
    }

    let dynamics = Dynamics::new(p, cfg.advection, cfg.mean_flow);
    let limit = dynamics.blowup_limit(&cfg);
    let mut rec = Recorder::new(p.nu, cfg.cadence, cfg.keep_states);
    for (m, (t, u)) in grid.iter().zip(&states).enumerate() {
        let (sup_sq, g) = dynamics.taming(u)?;
        check_finite(u, sup_sq, limit, if m == 0 { 0.0 } else { grid[m - 1] })?;
        rec.push(*t, u, dynamics.observed_sup(u, sup_sq)?, g);
    }
    let mut trajectory = rec.finish();
    trajectory.iterations = Some(iterations);
    Ok(PicardOutcome {
        trajectory,
        iterations,
        increments,
        energy_margin: check_energy.then_some(energy_margin),
        gradient_margin: p.is_tamed().then_some(gradient_margin),
    })
}
