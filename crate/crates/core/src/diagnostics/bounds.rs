use super::{CheckRecord, Status};
use crate::integrate::Trajectory;
use crate::stats::{fit_loglinear, fit_loglog};
use crate::taming::TamingParams;

const ROUNDOFF: f64 = 1e-12;

/// `||u(t)||^2 + 2 nu int_0^t ||grad u||^2 <= ||u_0||^2` at every recorded time.
///
/// The allowance at time `t` is twice the trapezoid error estimate of the
/// dissipation integral plus a relative round-off floor.
pub fn check_energy(traj: &Trajectory) -> CheckRecord {
    const NAME: &str = "energy";
    if traj.is_empty() {
        return CheckRecord::new(NAME, Status::Inconclusive, f64::NAN).with("reason", "empty trajectory");
    }
    let nu = traj.nu;
    let e0 = traj.l2[0].powi(2);
    let mut margin = f64::INFINITY;
    let mut raw = f64::INFINITY;
    let mut worst = 0;
    for i in 0..traj.len() {
        let lhs = traj.l2[i].powi(2) + 2.0 * nu * traj.cum_diss_h1[i];
        let tol = 2.0 * 2.0 * nu * traj.quad_err_h1.get(i).copied().unwrap_or(0.0) + ROUNDOFF * e0;
        let slack = e0 + tol - lhs;
        if slack < margin {
            margin = slack;
            worst = i;
        }
        raw = raw.min(e0 - lhs);
    }
    CheckRecord::new(NAME, Status::from_bool(margin >= 0.0), margin)
        .with_num("initial_energy", e0)
        .with_num("raw_margin", raw)
        .with_num("worst_time", traj.times[worst])
}

/// `||grad u(t)||^2 + nu int_0^t ||A u||^2 <= (kappa N / nu^2) ||u_0||^2 + ||grad u_0||^2`.
///
/// Informational when taming is disabled or a reference field is present,
/// where the bound is not claimed.
pub fn check_gradient_bound(traj: &Trajectory, p: &TamingParams) -> CheckRecord {
    const NAME: &str = "gradient_bound";
    if traj.is_empty() {
        return CheckRecord::new(NAME, Status::Inconclusive, f64::NAN).with("reason", "empty trajectory");
    }
    if !p.is_tamed() {
        return CheckRecord::new(NAME, Status::Info, f64::NAN).with("reason", "taming disabled; bound not claimed");
    }
    if p.has_reference() {
        return CheckRecord::new(NAME, Status::Info, f64::NAN).with("reason", "bound stated for a zero reference field");
    }
    let nu = p.nu;
    let rhs = p.kappa * p.threshold / (nu * nu) * traj.l2[0].powi(2) + traj.h1[0].powi(2);
    let mut margin = f64::INFINITY;
    let mut worst = 0;
    for i in 0..traj.len() {
        let lhs = traj.h1[i].powi(2) + nu * traj.cum_diss_h2[i];
        let tol = 2.0 * nu * traj.quad_err_h2.get(i).copied().unwrap_or(0.0) + ROUNDOFF * rhs;
        let slack = rhs + tol - lhs;
        if slack < margin {
            margin = slack;
            worst = i;
        }
    }
    CheckRecord::new(NAME, Status::from_bool(margin >= 0.0), margin)
        .with_num("bound", rhs)
        .with_num("worst_time", traj.times[worst])
}

/// Fit window for [`check_decay`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayWindow {
    pub start: f64,
    pub end: f64,
}

impl DecayWindow {
    /// Second half of the trajectory.
    pub fn tail(traj: &Trajectory) -> Self {
        let t = traj.horizon();
        Self { start: 0.5 * t, end: t }
    }
}

/// Slope threshold of the power-law branch.
const POWER_SLOPE: f64 = -0.4;
/// Required fit quality and decay factor of the exponential branch.
const EXP_R2: f64 = 0.99;
const EXP_DROP: f64 = 2.0;

/// Decay of `||grad u||`: the log-log slope over the window is at most
/// `-1/2 + 0.1`, or the window shows a clean exponential decay (log-linear
/// fit with `r^2 >= 0.99` and at least a factor two drop).
pub fn check_decay(traj: &Trajectory, window: DecayWindow) -> CheckRecord {
    const NAME: &str = "decay";
    let (t, h): (Vec<f64>, Vec<f64>) = traj
        .times
        .iter()
        .zip(&traj.h1)
        .filter(|(t, _)| **t > 0.0 && **t >= window.start && **t <= window.end)
        .map(|(a, b)| (*a, *b))
        .unzip();
    if t.len() >= 2 && h.iter().all(|&x| x == 0.0) {
        return CheckRecord::new(NAME, Status::Pass, 0.0).with("reason", "rest state");
    }
    if t.len() < 4 || h.iter().any(|&x| x <= 0.0) {
        return CheckRecord::new(NAME, Status::Inconclusive, f64::NAN)
            .with("reason", "tail window too short")
            .with("points", t.len());
    }
    let (Some(power), Some(expo)) = (fit_loglog(&t, &h), fit_loglinear(&t, &h)) else {
        return CheckRecord::new(NAME, Status::Inconclusive, f64::NAN).with("reason", "degenerate window");
    };
    let power_margin = POWER_SLOPE - power.slope;
    let drop = h[0] / h[h.len() - 1];
    let exp_margin = if expo.slope < 0.0 { (expo.r_squared - EXP_R2).min(drop.ln() - EXP_DROP.ln()) } else { -1.0 };
    let margin = power_margin.max(exp_margin);
    let branch = if power_margin >= 0.0 {
        "power"
    } else if exp_margin >= 0.0 {
        "exponential"
    } else {
        "none"
    };
    CheckRecord::new(NAME, Status::from_bool(margin >= 0.0), margin)
        .with("branch", branch)
        .with_num("loglog_slope", power.slope)
        .with_num("exp_rate", -expo.slope)
        .with_num("exp_r_squared", expo.r_squared)
        .with_num("window_start", window.start)
        .with_num("window_end", window.end)
}

// left Riemann sums of 1{sup^2 >= n} and sup^2 / n over the recorded grid
fn measure_and_bound(traj: &Trajectory, n: f64) -> (f64, f64) {
    let mut measure = 0.0;
    let mut bound = 0.0;
    for i in 0..traj.len().saturating_sub(1) {
        let dt = traj.times[i + 1] - traj.times[i];
        let s2 = traj.sup[i].powi(2);
        if s2 >= n {
            measure += dt;
        }
        bound += dt * s2 / n;
    }
    (measure, bound)
}

/// Measure of the taming set `{t : ||u(t)||_sup^2 >= N}` and its Chebyshev
/// bound `(1/N) int ||u||_sup^2`, both from the recorded sup series.
pub fn tame_time_measure(traj: &Trajectory, n: f64) -> CheckRecord {
    let (measure, bound) = measure_and_bound(traj, n);
    CheckRecord::new("tame_time", Status::from_bool(measure <= bound), bound - measure)
        .with_num("threshold", n)
        .with_num("measure", measure)
        .with_num("chebyshev_bound", bound)
        .with_num("horizon", traj.horizon())
}

/// Tame-time measure over ascending thresholds: each value obeys its
/// Chebyshev bound and the sequence is nonincreasing. With
/// `reduction = Some(r)` the last measure must also be below `r` times the
/// first.
pub fn tame_time_sweep(traj: &Trajectory, thresholds: &[f64], reduction: Option<f64>) -> CheckRecord {
    const NAME: &str = "tame_time_sweep";
    if thresholds.is_empty() || thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return CheckRecord::new(NAME, Status::Inconclusive, f64::NAN).with("reason", "thresholds must ascend");
    }
    let (measures, bounds): (Vec<f64>, Vec<f64>) = thresholds.iter().map(|&n| measure_and_bound(traj, n)).unzip();
    let chebyshev = measures.iter().zip(&bounds).map(|(m, b)| b - m).fold(f64::INFINITY, f64::min);
    let monotone = measures.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    let mut margin = chebyshev.min(if measures.len() > 1 { monotone } else { f64::INFINITY });
    if let Some(r) = reduction {
        margin = margin.min(r * measures[0] - measures[measures.len() - 1]);
    }
    let ok = chebyshev >= 0.0
        && monotone >= 0.0
        && reduction.is_none_or(|r| measures[measures.len() - 1] < r * measures[0]);
    CheckRecord::new(NAME, Status::from_bool(ok), margin)
        .with_nums("thresholds", thresholds)
        .with_nums("measures", &measures)
        .with_nums("chebyshev_bounds", &bounds)
}

/// Largest observed `||u||_sup^2 / (||u||_{H2} ||grad u||)`, the empirical
/// constant of the Agmon-type interpolation inequality.
pub fn sup_ratio_report(traj: &Trajectory) -> CheckRecord {
    let ratio = (0..traj.len())
        .filter(|&i| traj.h1[i] > 0.0)
        .map(|i| {
            let h2 = (traj.l2[i].powi(2) + traj.h2[i].powi(2)).sqrt();
            traj.sup[i].powi(2) / (h2 * traj.h1[i])
        })
        .fold(0.0, f64::max);
    CheckRecord::new("sup_interpolation_ratio", Status::Info, f64::NAN).with_num("max_ratio", ratio)
}
