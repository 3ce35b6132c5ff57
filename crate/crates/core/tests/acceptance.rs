//! Acceptance gate: ten end-to-end criteria, one `PASS`/`FAIL` line each.
//!
//! Runs with `harness = false` so the lines always reach the terminal.
//! Quantities are recomputed here from raw trajectory data where that is
//! cheap, instead of trusting the library's own check records.

use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rustfft::num_complex::Complex64;
use tamed_ns::attractor::{check_absorbing, integrate_ensemble, EnsembleSpec};
use tamed_ns::diagnostics::{self as diag, SignedPermutation, Status};
use tamed_ns::integrate::{picard_solve, picard_sweep};
use tamed_ns::operators::{apply_semigroup, galerkin_project};
use tamed_ns::oracle::reference_integrate_at;
use tamed_ns::presets::{random_spectrum, taylor_green};
use tamed_ns::{run, Result, SolverConfig, SpectralField, StepMode, StokesBasis, TamingParams, TorusParams, Trajectory};

const NU: f64 = 0.1;
const KAPPA: f64 = 1.0;
const THRESHOLD: f64 = 1.0;
const SEED: u64 = 2024;

const ORACLE_TOL: f64 = 1e-6;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
/// Regression value of the gradient-bound margin on the supercritical preset.
const GRADIENT_MARGIN: f64 = 21263.42;
const GRADIENT_MARGIN_RTOL: f64 = 1e-4;
const VALVE_REDUCTION: f64 = 0.25;
const ROTATION_TOL: f64 = 1e-10;
const GALILEAN_TOL: f64 = 1e-8;
const SCALE_TOL: f64 = 1e-6;
const PICARD_MAX_ITER: usize = 15;
const PICARD_TOL: f64 = 1e-8;
const PICARD_GAP: f64 = 1e-6;
const STOKES_ITERATE_RTOL: f64 = 1e-12;
const DECAY_SLOPE: f64 = -0.5;
const DEPENDENCE_SLOPE: f64 = 2.0;
const DEPENDENCE_SLOPE_TOL: f64 = 0.2;
const ENSEMBLE_SIZE: usize = 8;
const ENSEMBLE_RADIUS: f64 = 5.0;
const TAIL_N: [usize; 4] = [4, 8, 16, 32];
const TAIL_CONTRACTION: f64 = 0.1;
const VERIFY_BUDGET: Duration = Duration::from_secs(300);

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { ok, detail: detail.into() })
}

fn torus(n: usize) -> Arc<StokesBasis> {
    StokesBasis::torus(TorusParams::new(n)).unwrap()
}

fn params() -> TamingParams {
    TamingParams::new(NU, KAPPA, THRESHOLD).unwrap()
}

fn l2(u: &SpectralField) -> f64 {
    u.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn h1(u: &SpectralField) -> f64 {
    u.coeffs().iter().zip(u.basis().eigenvalues()).map(|(c, l)| l * c.norm_sqr()).sum::<f64>().sqrt()
}

fn max_over<T>(a: &[T], b: &[T], f: impl Fn(&T, &T) -> f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| f(x, y)).fold(0.0, f64::max)
}

// ordinary least squares slope of y on x
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    slope(&lx, &ly)
}

/// Worst slack of `||u||^2 + 2 nu int ||grad u||^2 <= ||u0||^2 + tol(t)`,
/// with `tol` twice the trapezoid error estimate.
fn energy_slack(tr: &Trajectory) -> f64 {
    let e0 = tr.l2[0].powi(2);
    (0..tr.len())
        .map(|i| {
            let tol = 4.0 * tr.nu * tr.quad_err_h1[i] + 1e-12 * e0;
            e0 + tol - tr.l2[i].powi(2) - 2.0 * tr.nu * tr.cum_diss_h1[i]
        })
        .fold(f64::INFINITY, f64::min)
}

fn supercritical(b: &Arc<StokesBasis>) -> SpectralField {
    random_spectrum(b, SEED, 1.0, 60.0).unwrap()
}

fn oracle() -> Result<Outcome> {
    let start = Instant::now();
    let b = torus(8);
    let u0 = random_spectrum(&b, SEED, 1.0, 1.0)?;
    let tr = run(&u0, &params(), &SolverConfig::new(1e-3, 1.0, StepMode::Etd2).with_cadence(10))?;
    let reference = reference_integrate_at(&u0, &params(), &tr.times, 1e-10)?;
    let diff = max_over(&tr.states, &reference.states, |a, c| l2(&(a - c)));
    let elapsed = start.elapsed();
    outcome(
        diff <= ORACLE_TOL && elapsed <= ORACLE_BUDGET,
        format!("max L2 difference {diff:.2e} (tol {ORACLE_TOL:.0e}), {:.1}s", elapsed.as_secs_f64()),
    )
}

fn energy() -> Result<Outcome> {
    let b = torus(16);
    let p = params();
    let c = SolverConfig::new(0.01, 1.0, StepMode::Etd2);
    let presets = [
        ("zero", SpectralField::zeros(&b)),
        ("single_mode", SpectralField::single_mode(&b, [1, 0, 0], 0, Complex64::new(1.0, 0.0))?),
        ("taylor_green", taylor_green(&b, 1.0)?),
        ("supercritical", supercritical(&b)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut control = None;
    for (name, u0) in presets {
        let tr = run(&u0, &p, &c)?;
        let slack = energy_slack(&tr);
        let rec = diag::check_energy(&tr);
        ok &= slack >= 0.0 && rec.status == Status::Pass;
        if name == "supercritical" {
            ok &= tr.sup[0].powi(2) > THRESHOLD;
        }
        if name == "taylor_green" {
            control = Some(tr);
        }
        parts.push(format!("{name} {slack:.2e}"));
    }
    let mut control = control.unwrap();
    for x in control.l2.iter_mut().skip(1) {
        *x *= 1.01f64.sqrt();
    }
    let caught = energy_slack(&control) < 0.0 && diag::check_energy(&control).status == Status::Fail;
    ok &= caught;
    parts.push(format!("corrupted control rejected: {caught}"));
    outcome(ok, format!("margins {}", parts.join(", ")))
}

fn gradient() -> Result<Outcome> {
    let b = torus(16);
    let p = params();
    let u0 = supercritical(&b);
    let tr = run(&u0, &p, &SolverConfig::new(0.01, 1.0, StepMode::Etd2))?;
    let rhs = KAPPA * THRESHOLD / (NU * NU) * l2(&u0).powi(2) + h1(&u0).powi(2);
    let margin = (0..tr.len())
        .map(|i| rhs + 2.0 * NU * tr.quad_err_h2[i] + 1e-12 * rhs - tr.h1[i].powi(2) - NU * tr.cum_diss_h2[i])
        .fold(f64::INFINITY, f64::min);
    let rec = diag::check_gradient_bound(&tr, &p);
    let pinned = ((margin - GRADIENT_MARGIN) / GRADIENT_MARGIN).abs() <= GRADIENT_MARGIN_RTOL;
    outcome(
        margin >= 0.0 && rec.status == Status::Pass && pinned,
        format!("margin {margin:.2} (pinned {GRADIENT_MARGIN}, rtol {GRADIENT_MARGIN_RTOL:.0e})"),
    )
}

// left Riemann sums of 1{sup^2 >= n} and sup^2 / n
fn tame_time(tr: &Trajectory, n: f64) -> (f64, f64) {
    let mut m = 0.0;
    let mut bound = 0.0;
    for i in 0..tr.len() - 1 {
        let dt = tr.times[i + 1] - tr.times[i];
        let s2 = tr.sup[i].powi(2);
        if s2 >= n {
            m += dt;
        }
        bound += dt * s2 / n;
    }
    (m, bound)
}

fn valve() -> Result<Outcome> {
    let b = torus(16);
    let c = SolverConfig::new(0.01, 1.0, StepMode::Etd2);
    let u0 = supercritical(&b);
    let untamed = run(&u0, &TamingParams::untamed(NU)?, &c)?;
    let max_sq = untamed.sup.iter().map(|s| s * s).fold(0.0, f64::max);
    let quiet = run(&u0, &TamingParams::new(NU, KAPPA, 10.0 * max_sq)?, &c)?;
    let identical = quiet.states.len() == untamed.states.len()
        && quiet.states.iter().zip(&untamed.states).all(|(a, b)| a.coeffs() == b.coeffs());

    let tr = run(&u0, &params(), &c)?;
    let open = tr.sup[0].powi(2) > THRESHOLD && tr.g_value[0] > 0.0;
    let sweep: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|k| tame_time(&tr, k * THRESHOLD)).collect();
    let chebyshev = sweep.iter().all(|(m, bound)| m <= bound);
    let measures: Vec<f64> = sweep.iter().map(|s| s.0).collect();
    let monotone = measures.windows(2).all(|w| w[1] <= w[0]);
    let reduced = measures[3] < VALVE_REDUCTION * measures[0];
    outcome(
        identical && open && chebyshev && monotone && reduced,
        format!(
            "closed bit-identical {identical}, g(0) = {:.3e}, measures {:?}, chebyshev {chebyshev}",
            tr.g_value[0],
            measures.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    )
}

fn relative_error(rec: &diag::CheckRecord) -> f64 {
    rec.details.get("relative_error").and_then(|v| v.as_f64()).unwrap_or(f64::INFINITY)
}

fn symmetry() -> Result<Outcome> {
    let b = torus(8);
    let p = TamingParams::new(NU, KAPPA, 4.0)?;
    let c = SolverConfig::new(1e-3, 0.05, StepMode::Etd2);
    let active = random_spectrum(&b, SEED, 1.0, 80.0)?;
    let calm = random_spectrum(&b, SEED, 1.0, 1.0)?;

    // (R u)(x) = Q^T u(Q x) evaluated pointwise, independent of the spectral map
    let q = SignedPermutation::quarter_turn_z();
    let direct = run(&active, &p, &c)?;
    let rotated = run(&q.transform(&active)?, &p, &c)?;
    let grid = direct.final_state().unwrap().grid_samples()?;
    let grid_r = rotated.final_state().unwrap().grid_samples()?;
    let m = grid.m;
    let h = grid.length / m as f64;
    let mut rot_err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let x = [i as f64 * h, j as f64 * h, k as f64 * h];
                let y = q.apply(x);
                let idx = |p: [f64; 3]| {
                    let w = |v: f64| ((v / h).round() as i64).rem_euclid(m as i64) as usize;
                    (w(p[0]) * m + w(p[1])) * m + w(p[2])
                };
                let at = |g: &tamed_ns::GridField, n: usize| [g.comps[0][n], g.comps[1][n], g.comps[2][n]];
                let u = at(&grid, idx(y));
                let expect = q.transpose_apply(u);
                let got = at(&grid_r, idx(x));
                for d in 0..3 {
                    rot_err = rot_err.max((got[d] - expect[d]).abs());
                    scale = scale.max(u[d].abs());
                }
            }
        }
    }
    let rot_rel = rot_err / scale;
    let rot_rec = diag::check_rotation(&active, &p, &c, &q)?;

    let gal = diag::check_galilean(&calm, &p, &SolverConfig::new(1e-3, 0.05, StepMode::Etd2), [0.3, -0.2, 0.1])?;
    let gal_err = relative_error(&gal);
    let sc = diag::check_scale(&active, &p, &c)?;
    let sc_err = relative_error(&sc);
    outcome(
        rot_rel <= ROTATION_TOL
            && relative_error(&rot_rec) <= ROTATION_TOL
            && gal.status == Status::Pass
            && gal_err <= GALILEAN_TOL
            && sc.status == Status::Pass
            && sc_err <= SCALE_TOL,
        format!("rotation {rot_rel:.1e}, galilean {gal_err:.1e}, scale {sc_err:.1e}"),
    )
}

fn picard() -> Result<Outcome> {
    let b = torus(8);
    let p = TamingParams::new(NU, KAPPA, 4.0)?;
    let u0 = random_spectrum(&b, SEED, 1.0, 0.5)?;
    let pc = SolverConfig { picard_tol: PICARD_TOL, picard_max_iter: PICARD_MAX_ITER, ..SolverConfig::new(0.01, 0.5, StepMode::Picard) };
    let out = picard_solve(&u0, &p, &pc, pc.horizon)?;
    let direct = run(&u0, &p, &SolverConfig::new(0.01, 0.5, StepMode::Etd2))?;
    let gap = max_over(&out.trajectory.states, &direct.states, |a, c| h1(&(a - c)));

    let times = out.trajectory.times.clone();
    let zero = vec![SpectralField::zeros(&b); times.len()];
    let second = picard_sweep(&u0, &zero, &times, &p, pc.advection)?;
    // heat flow per mode: c_j(t) = exp(-nu lambda_j t) c_j(0)
    let mut stokes: f64 = 0.0;
    for (&t, s) in times.iter().zip(&second) {
        let exact: Vec<Complex64> =
            u0.coeffs().iter().zip(b.eigenvalues()).map(|(c, l)| c * (-NU * l * t).exp()).collect();
        let e = SpectralField::from_coeffs(&b, exact)?;
        stokes = stokes.max(h1(&(s - &e)));
        stokes = stokes.max(h1(&(s - &apply_semigroup(NU * t, &u0)?)));
    }
    let stokes_tol = STOKES_ITERATE_RTOL * h1(&u0);
    outcome(
        out.iterations <= PICARD_MAX_ITER && gap <= PICARD_GAP && stokes <= stokes_tol,
        format!("{} iterations, ETD2 gap {gap:.1e}, Stokes iterate error {stokes:.1e}", out.iterations),
    )
}

fn decay() -> Result<Outcome> {
    let b = torus(8);
    let horizon = 50.0 / (NU * b.lambda1());
    let u0 = random_spectrum(&b, SEED, 1.0, 1.0)?;
    let c = SolverConfig { keep_states: false, ..SolverConfig::new(horizon / 1000.0, horizon, StepMode::Etd2) };
    let tr = run(&u0, &params(), &c)?;
    let (t, g): (Vec<f64>, Vec<f64>) =
        tr.times.iter().zip(&tr.h1).filter(|(t, _)| **t >= 0.5 * horizon).map(|(a, b)| (*a, *b)).unzip();
    let power = loglog_slope(&t, &g);
    let logs: Vec<f64> = g.iter().map(|v| v.ln()).collect();
    let rate = -slope(&t, &logs);
    // exponential branch: log-linear fit residuals tiny and a real drop
    let mt = t.iter().sum::<f64>() / t.len() as f64;
    let ml = logs.iter().sum::<f64>() / logs.len() as f64;
    let ss_tot: f64 = logs.iter().map(|l| (l - ml).powi(2)).sum();
    let ss_res: f64 = t.iter().zip(&logs).map(|(x, l)| (l - (ml - rate * (x - mt))).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let exponential = rate > 0.0 && r2 >= 0.99 && g[0] / g[g.len() - 1] >= 2.0;
    let rec = diag::check_decay(&tr, diag::DecayWindow::tail(&tr));
    outcome(
        (power <= DECAY_SLOPE || exponential) && rec.status == Status::Pass,
        format!("log-log slope {power:.2}, exponential rate {rate:.4} (r^2 {r2:.6})"),
    )
}

fn difference(a: &Trajectory, b: &Trajectory) -> f64 {
    let d: Vec<f64> = a.states.iter().zip(&b.states).map(|(x, y)| h1(&(x - y)).powi(2)).collect();
    let sup = d.iter().copied().fold(0.0, f64::max);
    let integral: f64 = (1..d.len()).map(|i| 0.5 * (a.times[i] - a.times[i - 1]) * (d[i] + d[i - 1])).sum();
    sup + integral
}

fn dependence() -> Result<Outcome> {
    let b = torus(8);
    let p = params();
    let c = SolverConfig::new(0.005, 0.2, StepMode::Etd2);
    let u0 = random_spectrum(&b, SEED, 1.0, 40.0)?;
    let dir = random_spectrum(&b, SEED + 1, 1.0, 1.0)?;
    let base = run(&u0, &p, &c)?;

    let eps = [1e-2, 1e-3, 1e-4];
    let mut d_eps = Vec::new();
    for e in eps {
        d_eps.push(difference(&base, &run(&u0.axpy(e, &dir)?, &p, &c)?));
    }
    let sizes: Vec<f64> = eps.iter().map(|e| e * h1(&dir)).collect();
    let s_data = loglog_slope(&sizes, &d_eps);

    let deltas = [0.5, 0.25, 0.125];
    let mut d_n = Vec::new();
    for d in deltas {
        d_n.push(difference(&base, &run(&u0, &p.clone().with_threshold(THRESHOLD + d)?, &c)?));
    }
    let s_thr = loglog_slope(&deltas, &d_n);
    let within = |s: f64| (s - DEPENDENCE_SLOPE).abs() <= DEPENDENCE_SLOPE_TOL;
    outcome(
        within(s_data) && within(s_thr),
        format!("slopes: initial data {s_data:.4}, threshold {s_thr:.4} (target {DEPENDENCE_SLOPE} +- {DEPENDENCE_SLOPE_TOL})"),
    )
}

fn attractor() -> Result<Outcome> {
    let b = torus(16);
    let p = params();
    let spec = EnsembleSpec::new(ENSEMBLE_SIZE, SEED, ENSEMBLE_RADIUS).with_times(vec![1.0]).with_n_list(TAIL_N.to_vec());
    let horizon = 8.0 / (NU * b.lambda1());
    let ens = integrate_ensemble(&spec, &b, &p, &SolverConfig::new(0.1, horizon, StepMode::Etd2), 1)?;

    // ||u(t)||^2 e^{2 nu lambda_1 t} <= ||u0||^2 pointwise, within the quadrature allowance
    let lambda1 = b.lambda1();
    let mut pp5: f64 = f64::INFINITY;
    for m in &ens.members {
        let tr = &m.trajectory;
        let e0 = l2(&m.initial).powi(2);
        for i in 0..tr.len() {
            let w = (2.0 * NU * lambda1 * tr.times[i]).exp();
            let tol = 4.0 * NU * tr.quad_err_h1[i] * w + 1e-12 * e0;
            pp5 = pp5.min(e0 + tol - tr.l2[i].powi(2) * w);
        }
    }
    let radius_ok = ens.members.iter().all(|m| (h1(&m.initial) - ENSEMBLE_RADIUS).abs() <= 1e-9 * ENSEMBLE_RADIUS);
    let absorbing = check_absorbing(&ens, lambda1, 0.01);

    let s: Vec<f64> = TAIL_N
        .iter()
        .map(|&n| {
            ens.members
                .iter()
                .map(|m| h1(&galerkin_project(n, &m.snapshots[0], true).unwrap()))
                .fold(0.0, f64::max)
        })
        .collect();
    let decreasing = s.windows(2).all(|w| w[1] < w[0]);
    let ratio = s[3] / s[0];
    outcome(
        pp5 >= 0.0 && radius_ok && absorbing.status != Status::Fail && decreasing && ratio < TAIL_CONTRACTION,
        format!(
            "{} members, PP5 margin {pp5:.2e}, s(n) {:?}, s(32)/s(4) = {ratio:.3}",
            ens.members.len(),
            s.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn verify() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_tns"))
        .arg("verify")
        .arg("--out")
        .arg(dir.path())
        .env_remove("TNS_LOG")
        .output()?;
    let elapsed = start.elapsed();
    let code = out.status.code();
    let report = dir.path().join("report.json").exists();
    outcome(
        code == Some(0) && elapsed <= VERIFY_BUDGET && report,
        format!("exit {code:?} in {:.1}s (budget {}s), report written {report}", elapsed.as_secs_f64(), VERIFY_BUDGET.as_secs()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("oracle equivalence", oracle),
        ("energy inequality", energy),
        ("gradient bound", gradient),
        ("taming valve", valve),
        ("symmetry suite", symmetry),
        ("picard mode", picard),
        ("decay", decay),
        ("continuous dependence", dependence),
        ("attractor mechanism", attractor),
        ("verify suite", verify),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match f() {
            Ok(o) => (o.ok, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
