use super::{CheckRecord, Status};
use crate::error::Result;
use crate::field::SpectralField;
use crate::integrate::{run, SolverConfig, Trajectory};
use crate::nonlinear::{bilinear_b, curl, deviation, vortex_stretching};
use crate::norms::weighted_sq;
use crate::operators::apply_a;
use crate::taming::TamingParams;

// states at every step on a uniform grid
fn uniform_states(traj: &Trajectory) -> Option<f64> {
    if traj.len() < 3 || traj.states.len() != traj.len() {
        return None;
    }
    let h = traj.times[1] - traj.times[0];
    let uniform = traj.times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
    uniform.then_some(h)
}

/// Largest `L2` residual of the vorticity equation
/// `d omega/dt = nu Laplace omega + (omega.grad) u - (u.grad) omega - g curl(u - U)`
/// with the time derivative taken by central differences. `None` when the
/// trajectory lacks states at every step of a uniform grid. Trajectories are
/// assumed to carry no mean flow.
pub fn vorticity_residual_value(traj: &Trajectory, p: &TamingParams) -> Result<Option<f64>> {
    let Some(h) = uniform_states(traj) else { return Ok(None) };
    let omega: Vec<SpectralField> = traj.states.iter().map(curl).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for m in 1..traj.len() - 1 {
        let dt = (&omega[m + 1] - &omega[m - 1]).scale(0.5 / h);
        let u = &traj.states[m];
        let mut rhs = &apply_a(&omega[m]).scale(-p.nu) + &vortex_stretching(u)?;
        let g = traj.g_value[m];
        if g > 0.0 {
            rhs = rhs.axpy(-g, &curl(&deviation(u, p))?)?;
        }
        worst = worst.max(weighted_sq(&(&dt - &rhs), 0).sqrt());
    }
    Ok(Some(worst))
}

pub fn vorticity_residual(traj: &Trajectory, p: &TamingParams) -> Result<CheckRecord> {
    Ok(match vorticity_residual_value(traj, p)? {
        Some(r) => CheckRecord::new("vorticity_residual", Status::Info, f64::NAN).with_num("residual", r),
        None => CheckRecord::new("vorticity_residual", Status::Inconclusive, f64::NAN)
            .with("reason", "needs states at every step of a uniform grid"),
    })
}

/// Largest `L2` residual of the integral form
/// `u(t) - u_0 - int_0^t (-nu A u + B(u, u) - g (u - U))`, the integral taken
/// by the trapezoid rule over the recorded states.
pub fn integral_residual(traj: &Trajectory, p: &TamingParams) -> Result<Option<f64>> {
    if uniform_states(traj).is_none() {
        return Ok(None);
    }
    let f: Vec<SpectralField> = traj
        .states
        .iter()
        .zip(&traj.g_value)
        .map(|(u, &g)| {
            let lin = apply_a(u).scale(-p.nu);
            let mut out = &lin + &bilinear_b(u, u)?;
            if g > 0.0 {
                out = out.axpy(-g, &deviation(u, p))?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let u0 = &traj.states[0];
    let mut acc = SpectralField::zeros(u0.basis());
    let mut worst = 0.0f64;
    for m in 1..traj.len() {
        let h = traj.times[m] - traj.times[m - 1];
        acc = acc.axpy(0.5 * h, &(&f[m] + &f[m - 1]))?;
        let r = &(&traj.states[m] - u0) - &acc;
        worst = worst.max(weighted_sq(&r, 0).sqrt());
    }
    Ok(Some(worst))
}

/// Residual refinement study: run at `cfg.dt` and `cfg.dt / 2` with states at
/// every step and require both the vorticity and the integral-form residual
/// to shrink at no less than the scheme's order minus 0.3.
pub fn check_residual_order(u0: &SpectralField, p: &TamingParams, cfg: &SolverConfig) -> Result<CheckRecord> {
    const NAME: &str = "residual_order";
    let coarse = SolverConfig { cadence: 1, keep_states: true, ..cfg.clone() };
    let fine = SolverConfig { dt: cfg.dt / 2.0, ..coarse.clone() };
    let a = run(u0, p, &coarse)?;
    let b = run(u0, p, &fine)?;
    let (Some(va), Some(vb), Some(ia), Some(ib)) = (
        vorticity_residual_value(&a, p)?,
        vorticity_residual_value(&b, p)?,
        integral_residual(&a, p)?,
        integral_residual(&b, p)?,
    ) else {
        return Ok(CheckRecord::new(NAME, Status::Inconclusive, f64::NAN).with("reason", "horizon too short"));
    };
    if va == 0.0 && ia == 0.0 {
        return Ok(CheckRecord::new(NAME, Status::Pass, 0.0).with("reason", "exact"));
    }
    let nominal = cfg.mode.order() as f64;
    let ov = (va / vb).log2();
    let oi = (ia / ib).log2();
    let margin = (ov - nominal + 0.3).min(oi - nominal + 0.3);
    Ok(CheckRecord::new(NAME, Status::from_bool(margin >= 0.0), margin)
        .with_num("vorticity_order", ov)
        .with_num("integral_order", oi)
        .with_nums("vorticity_residuals", &[va, vb])
        .with_nums("integral_residuals", &[ia, ib]))
}
