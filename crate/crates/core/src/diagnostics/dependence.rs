use super::{CheckRecord, Status};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::integrate::{run, SolverConfig, Trajectory};
use crate::norms::weighted_sq;
use crate::stats::fit_loglog;
use crate::taming::TamingParams;

const SLOPE: f64 = 2.0;
const SLOPE_TOL: f64 = 0.2;

/// `sup_t ||u - v||_{H1}^2 + int ||u - v||_{H1}^2` over two trajectories
/// recorded on the same time grid, with `||.||_{H1} = ||grad .||`.
pub fn difference_functional(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times != b.times || a.states.len() != a.len() || b.states.len() != b.len() {
        return Err(Error::Structural("trajectories must share recorded times and keep their states".into()));
    }
    let d: Vec<f64> = a.states.iter().zip(&b.states).map(|(x, y)| weighted_sq(&(x - y), 1)).collect();
    let sup = d.iter().copied().fold(0.0, f64::max);
    let integral: f64 = (1..d.len()).map(|i| 0.5 * (a.times[i] - a.times[i - 1]) * (d[i] + d[i - 1])).sum();
    Ok(sup + integral)
}

/// Compare the runs from `(u0, N)` and `(v0, M)`.
///
/// With identical inputs the trajectories must coincide bit for bit.
/// Otherwise the ratio `D / (|N - M|^2 + ||u0 - v0||_{H1}^2)` is reported;
/// its boundedness is asserted by the sweeps.
pub fn check_continuous_dependence(
    u0: &SpectralField,
    v0: &SpectralField,
    n: f64,
    m: f64,
    p: &TamingParams,
    cfg: &SolverConfig,
) -> Result<CheckRecord> {
    const NAME: &str = "continuous_dependence";
    let a = run(u0, &p.clone().with_threshold(n)?, cfg)?;
    let b = run(v0, &p.clone().with_threshold(m)?, cfg)?;
    let denom = (n - m).powi(2) + weighted_sq(&(u0 - v0), 1);
    if denom == 0.0 {
        let same = a.states == b.states && a.times == b.times;
        return Ok(CheckRecord::new(NAME, Status::from_bool(same), if same { 0.0 } else { -1.0 })
            .with("identical_inputs", true));
    }
    let d = difference_functional(&a, &b)?;
    Ok(CheckRecord::new(NAME, Status::Info, f64::NAN).with_num("difference", d).with_num("ratio", d / denom))
}

fn slope_record(name: &str, sizes: &[f64], diffs: &[f64], denoms: &[f64]) -> CheckRecord {
    let ratios: Vec<f64> = diffs.iter().zip(denoms).map(|(d, q)| d / q).collect();
    let rec = match fit_loglog(sizes, diffs) {
        Some(fit) if fit.points == sizes.len() => {
            let margin = SLOPE_TOL - (fit.slope - SLOPE).abs();
            CheckRecord::new(name, Status::from_bool(margin >= 0.0), margin).with_num("slope", fit.slope)
        }
        _ => CheckRecord::new(name, Status::Inconclusive, f64::NAN).with("reason", "degenerate sweep"),
    };
    rec.with_nums("sizes", sizes).with_nums("differences", diffs).with_nums("ratios", &ratios)
}

/// Sweep `v0 = u0 + eps * direction`; the difference functional must scale
/// like `eps^2` (log-log slope `2 +- 0.2`).
pub fn perturbation_sweep(
    u0: &SpectralField,
    direction: &SpectralField,
    eps: &[f64],
    p: &TamingParams,
    cfg: &SolverConfig,
) -> Result<CheckRecord> {
    if eps.len() < 2 {
        return Err(Error::Config("perturbation sweep needs at least two sizes".into()));
    }
    let base = run(u0, p, cfg)?;
    let dn = weighted_sq(direction, 1);
    let mut diffs = Vec::with_capacity(eps.len());
    for &e in eps {
        let tr = run(&u0.axpy(e, direction)?, p, cfg)?;
        diffs.push(difference_functional(&base, &tr)?);
    }
    let denoms: Vec<f64> = eps.iter().map(|e| e * e * dn).collect();
    Ok(slope_record("dependence_initial_data", eps, &diffs, &denoms))
}

/// Sweep `M = N + delta` with fixed initial data; the difference functional
/// must scale like `delta^2`. Requires the taming to be active somewhere on
/// the base run.
pub fn threshold_sweep(u0: &SpectralField, p: &TamingParams, deltas: &[f64], cfg: &SolverConfig) -> Result<CheckRecord> {
    const NAME: &str = "dependence_threshold";
    if deltas.len() < 2 {
        return Err(Error::Config("threshold sweep needs at least two sizes".into()));
    }
    let base = run(u0, p, cfg)?;
    if base.g_value.iter().all(|&g| g == 0.0) {
        return Ok(CheckRecord::new(NAME, Status::Inconclusive, f64::NAN).with("reason", "taming never active"));
    }
    let mut diffs = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let q = p.clone().with_threshold(p.threshold + d)?;
        diffs.push(difference_functional(&base, &run(u0, &q, cfg)?)?);
    }
    let denoms: Vec<f64> = deltas.iter().map(|d| d * d).collect();
    Ok(slope_record(NAME, deltas, &diffs, &denoms))
}
