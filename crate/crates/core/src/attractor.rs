//! Absorbing-set and tail-compactness checks over ensembles of trajectories.
//!
//! Without forcing the global attractor of the torus problem is the rest
//! state, so these checks look at the mechanism that produces it: every
//! bounded set of initial data is absorbed by small `H1` balls, and the high
//! mode tails `(I - Pi_n) S(t) u0` become uniformly small for `t > 0`.
//! `Pi_n` projects onto the first `n` eigenmodes in eigenvalue order.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::StokesBasis;
use crate::diagnostics::{CheckRecord, Status};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::integrate::{run, SolverConfig, Trajectory};
use crate::io::{fmt_f64, write_atomic};
use crate::norms::{norm, NormKind};
use crate::presets::random_spectrum;
use crate::stats::fit_loglinear;
use crate::taming::TamingParams;

/// A reproducible bounded family of initial data in `H1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub count: usize,
    pub seed: u64,
    /// Every member has `||grad u0|| = radius`.
    pub radius: f64,
    /// Spectral slope of the random coefficients, see [`random_spectrum`].
    pub slope: f64,
    /// Observation times; states are retained only there.
    pub times: Vec<f64>,
    /// Mode counts for the tail projections.
    pub n_list: Vec<usize>,
}

impl EnsembleSpec {
    pub fn new(count: usize, seed: u64, radius: f64) -> Self {
        EnsembleSpec { count, seed, radius, slope: 8.0, times: vec![1.0], n_list: vec![4, 8, 16, 32] }
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Self {
        self.times = times;
        self
    }

    pub fn with_n_list(mut self, n_list: Vec<usize>) -> Self {
        self.n_list = n_list;
        self
    }

    pub fn with_slope(mut self, slope: f64) -> Self {
        self.slope = slope;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("ensemble count must be positive".into()));
        }
        if !(self.radius >= 0.0) || !self.radius.is_finite() {
            return Err(Error::Config(format!("ensemble radius must be finite and nonnegative, got {}", self.radius)));
        }
        if !self.slope.is_finite() {
            return Err(Error::Config("ensemble slope must be finite".into()));
        }
        if self.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::Config("observation times must be finite and nonnegative".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_list must be strictly ascending".into()));
        }
        Ok(())
    }

    /// Per-member seeds, all drawn from the ensemble seed.
    pub fn member_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count).map(|_| rng.next_u64()).collect()
    }

    pub fn initial_data(&self, basis: &Arc<StokesBasis>) -> Result<Vec<SpectralField>> {
        self.validate()?;
        self.member_seeds().into_iter().map(|s| random_spectrum(basis, s, self.slope, self.radius)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Member {
    pub seed: u64,
    pub initial: SpectralField,
    /// Observables at every recorded step; states are dropped.
    pub trajectory: Trajectory,
    /// States at `EnsembleSpec::times`, in the same order.
    pub snapshots: Vec<SpectralField>,
    /// Recorded index of each snapshot.
    pub snapshot_index: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub spec: EnsembleSpec,
    pub members: Vec<Member>,
}

fn recorded_index(traj: &Trajectory, t: f64, dt: f64) -> Option<usize> {
    let tol = 1e-6 * dt;
    traj.times.iter().position(|&s| (s - t).abs() <= tol)
}

fn run_member(seed: u64, u0: SpectralField, spec: &EnsembleSpec, p: &TamingParams, cfg: &SolverConfig) -> Result<Member> {
    let cfg = SolverConfig { keep_states: true, ..cfg.clone() };
    let mut traj = run(&u0, p, &cfg)?;
    let mut snapshots = Vec::with_capacity(spec.times.len());
    let mut snapshot_index = Vec::with_capacity(spec.times.len());
    for &t in &spec.times {
        let i = recorded_index(&traj, t, cfg.dt).ok_or_else(|| {
            Error::Config(format!("observation time {t} is not on the recorded grid (dt {}, cadence {})", cfg.dt, cfg.cadence))
        })?;
        snapshots.push(traj.states[i].clone());
        snapshot_index.push(i);
    }
    traj.states.clear();
    Ok(Member { seed, initial: u0, trajectory: traj, snapshots, snapshot_index })
}

/// Integrate every member, using up to `jobs` threads. Results do not
/// depend on `jobs`.
pub fn integrate_ensemble(
    spec: &EnsembleSpec,
    basis: &Arc<StokesBasis>,
    p: &TamingParams,
    cfg: &SolverConfig,
    jobs: usize,
) -> Result<Ensemble> {
    let data = spec.initial_data(basis)?;
    let seeds = spec.member_seeds();
    if let Some(&t) = spec.times.iter().find(|&&t| t > cfg.horizon) {
        return Err(Error::Config(format!("observation time {t} exceeds the horizon {}", cfg.horizon)));
    }
    let jobs = jobs.clamp(1, spec.count);
    let work: Vec<(u64, SpectralField)> = seeds.into_iter().zip(data).collect();
    let chunk = work.len().div_ceil(jobs);
    let results: Vec<Result<Member>> = std::thread::scope(|s| {
        let handles: Vec<_> = work
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter().map(|(seed, u0)| run_member(*seed, u0.clone(), spec, p, cfg)).collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("ensemble worker panicked")).collect()
    });
    let members = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { spec: spec.clone(), members })
}

/// Energy decay `||u(t)||^2 <= ||u0||^2 exp(-2 nu lambda_1 t)` at every
/// recorded time, followed by absorption into the ball `||grad u|| < eps`.
///
/// The pointwise inequality carries the same allowance as the energy check,
/// twice the trapezoid error estimate of `2 nu int ||grad u||^2`, scaled by
/// the exponential weight. Once a member has dropped below `0.95 eps` it
/// must never climb back above `eps`. Members that have not entered the ball
/// by the end of their run make the check inconclusive.
pub fn check_absorbing(ens: &Ensemble, lambda1: f64, eps: f64) -> CheckRecord {
    const NAME: &str = "absorbing_set";
    let mut margin = f64::INFINITY;
    let mut entry = Vec::with_capacity(ens.members.len());
    let mut rates = Vec::with_capacity(ens.members.len());
    let mut reexit = false;
    let mut missing = 0usize;
    let mut short = false;
    for m in &ens.members {
        let tr = &m.trajectory;
        if tr.len() < 2 {
            short = true;
            continue;
        }
        let nu = tr.nu;
        let e0 = tr.l2[0] * tr.l2[0];
        for i in 0..tr.len() {
            let w = (2.0 * nu * lambda1 * tr.times[i]).exp();
            let tol = 2.0 * 2.0 * nu * tr.quad_err_h1[i] * w + 1e-12 * e0;
            let lhs = tr.l2[i] * tr.l2[i] * w;
            margin = margin.min(e0 + tol - lhs);
        }
        let first = tr.h1.iter().position(|&h| h < eps);
        entry.push(first.map_or(f64::NAN, |i| tr.times[i]));
        if first.is_none() {
            missing += 1;
        }
        if let Some(j) = tr.h1.iter().position(|&h| h < 0.95 * eps) {
            reexit |= tr.h1[j..].iter().any(|&h| h > eps);
        }
        let sq: Vec<f64> = tr.h1.iter().map(|h| h * h).collect();
        let half = tr.len() / 2;
        if let Some(f) = fit_loglinear(&tr.times[half..], &sq[half..]) {
            rates.push(-f.slope);
        }
    }
    if short {
        return CheckRecord::new(NAME, Status::Inconclusive, f64::NAN).with("reason", "ensemble too short");
    }
    let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let nu = ens.members.first().map_or(0.0, |m| m.trajectory.nu);
    let status = if margin < 0.0 || reexit {
        Status::Fail
    } else if missing > 0 {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    let max_entry = entry.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    CheckRecord::new(NAME, status, margin)
        .with_num("eps", eps)
        .with_nums("entry_times", &entry)
        .with_num("max_entry_time", max_entry)
        .with("members_outside", missing)
        .with("reexit", reexit)
        .with_num("min_tail_rate_h1_sq", min_rate)
        .with_num("envelope_rate", 0.5 * nu * lambda1)
}

/// `||(I - Pi_n) u||_{H1}`.
pub fn tail_norm(u: &SpectralField, n: usize) -> f64 {
    let ev = u.basis().eigenvalues();
    u.coeffs().iter().zip(ev).skip(n).map(|(c, &l)| l * c.norm_sqr()).sum::<f64>().sqrt()
}

/// Tail sizes `s(n) = max_members ||(I - Pi_n) S(t) u0||_{H1}` at the
/// observation time `t` for every `n` in the ensemble's `n_list`.
pub fn tail_profile(ens: &Ensemble, t: f64) -> Result<Vec<f64>> {
    let k = ens
        .spec
        .times
        .iter()
        .position(|&s| s == t)
        .ok_or_else(|| Error::Config(format!("{t} is not an observation time of the ensemble")))?;
    let Some(first) = ens.members.first() else { return Ok(vec![0.0; ens.spec.n_list.len()]) };
    let modes = first.initial.len();
    if let Some(&n) = ens.spec.n_list.iter().find(|&&n| n >= modes) {
        return Err(Error::Config(format!("n_list entry {n} exceeds the {modes} resolved modes")));
    }
    Ok(ens
        .spec
        .n_list
        .iter()
        .map(|&n| ens.members.iter().map(|m| tail_norm(&m.snapshots[k], n)).fold(0.0, f64::max))
        .collect())
}

/// Uniform smallness of the high-mode tails at time `t > 0`.
///
/// Asserts that `s(n)` is nonincreasing over `n_list` and that
/// `s(n_max) / s(n_min) < contraction`. Two envelopes are reported as
/// information: the modewise linear bound
/// `s(n)^2 <= exp(-2 nu lambda_{n+1} t) max ||u0||_{H1}^2` and
/// `s(n)^2 <= exp(-nu lambda_{n+1} t) max ||u0||_{H1}^2 + (nu sqrt(2 nu lambda_{n+1}))^{-1} (int h^2)^{1/2}`
/// with `h = C ||A u|| ||grad u||^3`, where `C` is the smallest constant
/// that makes the latter hold.
pub fn check_tail_compactness(ens: &Ensemble, t: f64, contraction: f64) -> Result<CheckRecord> {
    const NAME: &str = "tail_compactness";
    let s = tail_profile(ens, t)?;
    let n_list = &ens.spec.n_list;
    let Some(first) = ens.members.first() else {
        return Ok(CheckRecord::new(NAME, Status::Inconclusive, f64::NAN).with("reason", "empty ensemble"));
    };
    let ev = first.initial.basis().eigenvalues();
    if ev.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Structural("eigenvalues are not sorted".into()));
    }
    if t == 0.0 {
        return Ok(CheckRecord::new(NAME, Status::Info, f64::NAN)
            .with("reason", "no decay is claimed at t = 0")
            .with_nums("s", &s));
    }
    if s.len() < 2 {
        return Ok(CheckRecord::new(NAME, Status::Inconclusive, f64::NAN).with("reason", "n_list needs two entries"));
    }
    let nonincreasing = s.windows(2).all(|w| w[1] <= w[0]);
    let strictly = s.windows(2).all(|w| w[1] < w[0]);
    let ratio = if s[0] == 0.0 { 0.0 } else { s[s.len() - 1] / s[0] };
    let margin = if nonincreasing { contraction - ratio } else { -1.0 };

    let nu = first.trajectory.nu;
    let u0_sq = ens.members.iter().map(|m| m.trajectory.h1[0].powi(2)).fold(0.0, f64::max);
    let k = ens.spec.times.iter().position(|&x| x == t).unwrap_or(0);
    // int_0^t (||A u|| ||grad u||^3)^2 by trapezoid on the recorded grid
    let forcing = ens
        .members
        .iter()
        .map(|m| {
            let tr = &m.trajectory;
            let end = m.snapshot_index[k];
            let f: Vec<f64> = (0..=end).map(|i| (tr.h2[i] * tr.h1[i].powi(3)).powi(2)).collect();
            (1..=end).map(|i| 0.5 * (tr.times[i] - tr.times[i - 1]) * (f[i] + f[i - 1])).sum::<f64>()
        })
        .fold(0.0, f64::max);
    let mut linear_ok = true;
    let mut c_fit = 0.0f64;
    for (&n, &sn) in n_list.iter().zip(&s) {
        let lam = ev[n];
        linear_ok &= sn * sn <= (-2.0 * nu * lam * t).exp() * u0_sq * (1.0 + 1e-9) + 1e-300;
        let excess = sn * sn - (-nu * lam * t).exp() * u0_sq;
        if excess > 0.0 && forcing > 0.0 {
            c_fit = c_fit.max(excess * nu * (2.0 * nu * lam).sqrt() / forcing.sqrt());
        }
    }
    Ok(CheckRecord::new(NAME, Status::from_bool(margin >= 0.0), margin)
        .with_num("t", t)
        .with_nums("s", &s)
        .with("n_list", n_list.clone())
        .with_num("ratio", ratio)
        .with_num("contraction", contraction)
        .with("strictly_decreasing", strictly)
        .with("linear_envelope_holds", linear_ok)
        .with_num("envelope_constant", c_fit))
}

/// One row per member and retained observation time.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub member: usize,
    pub time: f64,
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    pub sup: f64,
    /// Leading coefficients `Pi_n u`.
    pub coords: Vec<rustfft::num_complex::Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorSample {
    pub n_coords: usize,
    pub rows: Vec<SampleRow>,
}

/// Snapshots at observation times `>= burn_in`, with the first `n_coords`
/// coefficients of each state.
pub fn sample_attractor(ens: &Ensemble, burn_in: f64, n_coords: usize) -> Result<AttractorSample> {
    let horizon = ens.members.iter().map(|m| m.trajectory.horizon()).fold(0.0, f64::max);
    if !(burn_in < horizon) {
        return Err(Error::Config(format!("burn-in {burn_in} must be below the horizon {horizon}")));
    }
    let mut rows = Vec::new();
    for (id, m) in ens.members.iter().enumerate() {
        for (k, &t) in ens.spec.times.iter().enumerate() {
            if t < burn_in {
                continue;
            }
            let u = &m.snapshots[k];
            let i = m.snapshot_index[k];
            let tr = &m.trajectory;
            rows.push(SampleRow {
                member: id,
                time: t,
                l2: tr.l2[i],
                h1: tr.h1[i],
                h2: tr.h2[i],
                sup: norm(u, NormKind::Sup)?,
                coords: u.coeffs().iter().take(n_coords).copied().collect(),
            });
        }
    }
    Ok(AttractorSample { n_coords, rows })
}

impl AttractorSample {
    pub fn all_below(&self, eps: f64) -> bool {
        self.rows.iter().all(|r| r.h1 < eps)
    }

    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> Result<()> {
        let mut header = String::from("member,time,l2,h1,h2_proxy,sup");
        for j in 0..self.n_coords {
            header.push_str(&format!(",re_{j},im_{j}"));
        }
        writeln!(w, "{header}")?;
        for r in &self.rows {
            let mut line = format!(
                "{},{},{},{},{},{}",
                r.member,
                fmt_f64(r.time),
                fmt_f64(r.l2),
                fmt_f64(r.h1),
                fmt_f64(r.h2),
                fmt_f64(r.sup)
            );
            for c in &r.coords {
                line.push_str(&format!(",{},{}", fmt_f64(c.re), fmt_f64(c.im)));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_csv(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::TorusParams;
    use crate::integrate::StepMode;
    use crate::nonlinear::AdvectionForm;

    fn basis(n: usize) -> Arc<StokesBasis> {
        StokesBasis::torus(TorusParams::new(n)).unwrap()
    }

    #[test]
    fn spec_validation_and_data() {
        let b = basis(8);
        let spec = EnsembleSpec::new(4, 7, 5.0);
        let data = spec.initial_data(&b).unwrap();
        assert_eq!(data.len(), 4);
        for u in &data {
            assert!(norm(u, NormKind::H1).unwrap() <= 5.0 * (1.0 + 1e-12));
        }
        assert_eq!(data, spec.initial_data(&b).unwrap());
        assert_ne!(data[0], data[1]);
        assert!(EnsembleSpec::new(0, 1, 1.0).validate().is_err());
        assert!(EnsembleSpec::new(1, 1, -1.0).validate().is_err());
        assert!(EnsembleSpec::new(1, 1, 1.0).with_n_list(vec![4, 4]).validate().is_err());
    }

    #[test]
    fn single_low_mode_decays_at_the_poincare_rate() {
        let b = basis(8);
        let p = TamingParams::untamed(0.1).unwrap();
        let u0 = SpectralField::single_mode(&b, [1, 0, 0], 0, rustfft::num_complex::Complex64::new(1.0, 0.0)).unwrap();
        let spec = EnsembleSpec::new(1, 0, 1.0).with_times(vec![5.0]);
        let cfg = SolverConfig { advection: AdvectionForm::Off, ..SolverConfig::new(0.1, 40.0, StepMode::Etd2) };
        let m = run_member(0, u0, &spec, &p, &cfg).unwrap();
        let ens = Ensemble { spec, members: vec![m] };
        let rec = check_absorbing(&ens, b.lambda1(), 0.1);
        assert!(rec.passed(), "{rec:?}");
        let rate = rec.details["min_tail_rate_h1_sq"].as_f64().unwrap();
        assert!((rate - 0.2).abs() < 1e-9);
        // equality up to rounding
        assert!(rec.margin.abs() < 1e-9);
    }

    #[test]
    fn absorbing_and_tails_on_small_ensemble() {
        let b = basis(8);
        let p = TamingParams::new(0.1, 1.0, 4.0).unwrap();
        let spec = EnsembleSpec::new(3, 11, 5.0).with_times(vec![0.0, 1.0]).with_n_list(vec![4, 8, 16, 32]);
        let cfg = SolverConfig::new(0.05, 70.0, StepMode::Etd2);
        let ens = integrate_ensemble(&spec, &b, &p, &cfg, 2).unwrap();
        let again = integrate_ensemble(&spec, &b, &p, &cfg, 1).unwrap();
        assert_eq!(ens.members[2].snapshots, again.members[2].snapshots);
        let rec = check_absorbing(&ens, b.lambda1(), 0.01);
        assert!(rec.passed(), "{rec:?}");
        let tails = check_tail_compactness(&ens, 1.0, 0.5).unwrap();
        assert!(tails.passed(), "{tails:?}");
        assert_eq!(tails.details["strictly_decreasing"], true);
        assert_eq!(check_tail_compactness(&ens, 0.0, 0.5).unwrap().status, Status::Info);
        let s0 = tail_profile(&ens, 0.0).unwrap();
        let direct = ens.members.iter().map(|m| tail_norm(&m.initial, 4)).fold(0.0, f64::max);
        assert_eq!(s0[0], direct);

        let sample = sample_attractor(&ens, 0.0, 3).unwrap();
        assert_eq!(sample.rows.len(), 3 * 2);
        let late = sample_attractor(&ens, 0.5, 3).unwrap();
        assert_eq!(late.rows.len(), 3);
        assert!(sample_attractor(&ens, 80.0, 3).is_err());
        let mut buf = Vec::new();
        sample.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("member,time,l2,h1,h2_proxy,sup,re_0,im_0"));
    }

    #[test]
    fn linear_tails_obey_modewise_decay() {
        let b = basis(8);
        let p = TamingParams::untamed(0.1).unwrap();
        let spec = EnsembleSpec::new(2, 3, 2.0).with_times(vec![2.0]);
        let cfg = SolverConfig { advection: AdvectionForm::Off, ..SolverConfig::new(0.1, 2.0, StepMode::Etd1) };
        let ens = integrate_ensemble(&spec, &b, &p, &cfg, 2).unwrap();
        let rec = check_tail_compactness(&ens, 2.0, 1.0).unwrap();
        assert_eq!(rec.details["linear_envelope_holds"], true);
        let spec_big = spec.clone().with_n_list(vec![4, 100_000]);
        let ens_big = Ensemble { spec: spec_big, members: ens.members.clone() };
        assert!(check_tail_compactness(&ens_big, 2.0, 1.0).is_err());
    }

    #[test]
    fn injected_growth_fails_and_short_runs_are_inconclusive() {
        let b = basis(8);
        let p = TamingParams::new(0.1, 1.0, 4.0).unwrap();
        let spec = EnsembleSpec::new(1, 5, 1.0).with_times(vec![]);
        let cfg = SolverConfig::new(0.05, 2.0, StepMode::Etd2);
        let mut ens = integrate_ensemble(&spec, &b, &p, &cfg, 1).unwrap();
        assert_eq!(check_absorbing(&ens, 1.0, 1e-6).status, Status::Inconclusive);
        let tr = &mut ens.members[0].trajectory;
        let last = tr.len() - 1;
        tr.l2[last] *= 2.0;
        assert_eq!(check_absorbing(&ens, 1.0, 1e-6).status, Status::Fail);
        let bad = EnsembleSpec::new(1, 5, 1.0).with_times(vec![0.025]);
        assert!(integrate_ensemble(&bad, &b, &p, &cfg, 1).is_err());
    }
}
