use super::{CheckRecord, Status};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::integrate::{run, SolverConfig, Trajectory};
use crate::norms::{norm, NormKind};
use crate::stats::fit_loglog;
use crate::taming::TamingParams;

// ||u(t)||_{Lq}^r at the recorded states and its running trapezoid integral
fn moments(traj: &Trajectory, q: f64, r: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if traj.states.len() != traj.len() {
        return Err(Error::Structural("Lq moments need the recorded states".into()));
    }
    let m: Vec<f64> = traj.states.iter().map(|u| norm(u, NormKind::Lq(q)).map(|x| x.powf(r))).collect::<Result<_>>()?;
    let mut int = vec![0.0; m.len()];
    for i in 1..m.len() {
        int[i] = int[i - 1] + 0.5 * (traj.times[i] - traj.times[i - 1]) * (m[i] + m[i - 1]);
    }
    Ok((m, int))
}

/// Smallest `kappa >= 1` for which
/// `||u(t)||_{Lq}^r <= ||u_0||_{Lq}^r + (r kappa / nu) N int_0^t ||u||_{Lq}^r`
/// holds along the stored trajectory. The inequality is affine in `kappa`,
/// so the threshold is computed directly rather than by bisection.
pub fn kappa_star(traj: &Trajectory, q: f64, r: f64, p: &TamingParams) -> Result<f64> {
    if !p.is_tamed() {
        return Ok(1.0);
    }
    let (m, int) = moments(traj, q, r)?;
    let mut k = 1.0f64;
    for i in 1..m.len() {
        let excess = m[i] - m[0];
        if excess > 0.0 {
            if int[i] <= 0.0 {
                return Ok(f64::INFINITY);
            }
            k = k.max(excess * p.nu / (r * p.threshold * int[i]));
        }
    }
    Ok(k)
}

/// Lq moment inequality along a stored trajectory for a supplied `kappa`,
/// together with its Gronwall form `||u(t)||^r <= ||u_0||^r exp((r kappa / nu) N t)`.
/// Always informational.
pub fn lq_moment_report(traj: &Trajectory, q: f64, r: f64, kappa: f64, p: &TamingParams) -> Result<CheckRecord> {
    if !(q >= 2.0 && r >= 1.0) {
        return Err(Error::Domain(format!("moment report needs q >= 2 and r >= 1, got q = {q}, r = {r}")));
    }
    let (m, int) = moments(traj, q, r)?;
    let n = p.threshold;
    let c = r * kappa / p.nu;
    let mut margin = f64::INFINITY;
    let mut gronwall = f64::INFINITY;
    for i in 0..m.len() {
        let rhs = if n.is_finite() { m[0] + c * n * int[i] } else { f64::INFINITY };
        margin = margin.min(rhs - m[i]);
        let g = if n.is_finite() { m[0] * (c * n * traj.times[i]).exp() } else { f64::INFINITY };
        gronwall = gronwall.min(g - m[i]);
    }
    Ok(CheckRecord::new(format!("lq_moment_q{q}"), Status::Info, margin)
        .with_num("q", q)
        .with_num("r", r)
        .with_num("kappa", kappa)
        .with("inequality_holds", margin >= 0.0)
        .with("gronwall_holds", gronwall >= 0.0)
        .with_num("kappa_star", kappa_star(traj, q, r, p)?))
}

/// `kappa*(q)` over several exponents and the fitted power of `q`.
pub fn lq_kappa_sweep(traj: &Trajectory, qs: &[f64], r: f64, p: &TamingParams) -> Result<CheckRecord> {
    let ks: Vec<f64> = qs.iter().map(|&q| kappa_star(traj, q, r, p)).collect::<Result<_>>()?;
    let exponent = fit_loglog(qs, &ks).map_or(f64::NAN, |f| f.slope);
    Ok(CheckRecord::new("lq_kappa_sweep", Status::Info, f64::NAN)
        .with_nums("q", qs)
        .with_nums("kappa_star", &ks)
        .with("all_finite", ks.iter().all(|k| k.is_finite()))
        .with_num("fitted_exponent", exponent))
}

/// Fixed-point search `N_{k+1} = max_t ||u_{N_k}(t)||_sup^2` started from
/// `n1`. Informational: a bounded sequence is consistent with a regular
/// solution on the horizon, but nothing is asserted.
pub fn threshold_recursion(
    u0: &SpectralField,
    p: &TamingParams,
    cfg: &SolverConfig,
    n1: f64,
    max_k: usize,
    rel_tol: f64,
) -> Result<CheckRecord> {
    let mut seq = vec![n1];
    let mut converged = false;
    for _ in 0..max_k {
        let nk = *seq.last().expect("nonempty");
        let tr = run(u0, &p.clone().with_threshold(nk.max(1.0))?, cfg)?;
        let next = tr.sup.iter().map(|s| s * s).fold(0.0, f64::max);
        seq.push(next);
        if (next - nk).abs() <= rel_tol * nk.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    Ok(CheckRecord::new("threshold_recursion", Status::Info, f64::NAN)
        .with_nums("sequence", &seq)
        .with("converged", converged))
}
