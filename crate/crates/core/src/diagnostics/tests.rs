use std::sync::Arc;

use super::*;
use crate::basis::{StokesBasis, TorusParams};
use crate::field::SpectralField;
use crate::integrate::{run, SolverConfig, StepMode, Trajectory};
use crate::nonlinear::AdvectionForm;
use crate::presets::taylor_green;
use crate::taming::TamingParams;
use crate::testutil::random_field;
use rustfft::num_complex::Complex64;

fn torus(n: usize) -> Arc<StokesBasis> {
    StokesBasis::torus(TorusParams::new(n)).unwrap()
}

fn cfg(dt: f64, t: f64) -> SolverConfig {
    SolverConfig::new(dt, t, StepMode::Etd2)
}

fn zero_traj() -> (Trajectory, TamingParams) {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 4.0).unwrap();
    (run(&SpectralField::zeros(&b), &p, &cfg(0.01, 0.2)).unwrap(), p)
}

#[test]
fn report_bookkeeping() {
    let mut r = DiagnosticsReport::new().with_meta("n", 8);
    r.push(CheckRecord::new("a", Status::Pass, 1.0)).unwrap();
    r.push(CheckRecord::new("b", Status::Info, f64::NAN).with_num("x", f64::INFINITY)).unwrap();
    assert!(r.push(CheckRecord::new("a", Status::Fail, -1.0)).is_err());
    assert!(r.all_passed());
    r.push(CheckRecord::new("c", Status::Inconclusive, f64::NAN)).unwrap();
    assert_eq!(r.failures(), vec!["c"]);
    let json = r.to_json();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["records"][1]["margin"], serde_json::Value::Null);
    assert_eq!(v["records"][1]["details"]["x"], serde_json::Value::Null);
    assert_eq!(json, r.clone().to_json());
    assert!(r.to_table().contains("INCONCLUSIVE"));
}

#[test]
fn zero_trajectory_checks() {
    let (tr, p) = zero_traj();
    let e = check_energy(&tr);
    assert_eq!((e.status, e.margin), (Status::Pass, 0.0));
    let g = check_gradient_bound(&tr, &p);
    assert_eq!((g.status, g.margin), (Status::Pass, 0.0));
    assert_eq!(check_decay(&tr, DecayWindow::tail(&tr)).status, Status::Pass);
    assert_eq!(vorticity_residual_value(&tr, &p).unwrap(), Some(0.0));
    let lq = lq_moment_report(&tr, 4.0, 2.0, 1.0, &p).unwrap();
    assert_eq!((lq.status, lq.margin), (Status::Info, 0.0));
}

#[test]
fn energy_and_gradient_on_supercritical_data() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let u0 = random_field(&b, 9, 60.0);
    let tr = run(&u0, &p, &cfg(0.002, 0.3)).unwrap();
    assert!(tr.g_value[0] > 0.0);
    let e = check_energy(&tr);
    assert!(e.passed(), "{e:?}");
    let g = check_gradient_bound(&tr, &p);
    assert!(g.passed(), "{g:?}");
    let untamed = TamingParams::untamed(0.1).unwrap();
    assert_eq!(check_gradient_bound(&tr, &untamed).status, Status::Info);
}

#[test]
fn corrupted_energy_fails() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 4.0).unwrap();
    let mut tr = run(&taylor_green(&b, 1.0).unwrap(), &p, &cfg(0.01, 0.5)).unwrap();
    assert!(check_energy(&tr).passed());
    for x in tr.l2.iter_mut().skip(1) {
        *x *= 1.01f64.sqrt();
    }
    assert_eq!(check_energy(&tr).status, Status::Fail);
}

#[test]
fn decay_branches() {
    let b = torus(8);
    let p = TamingParams::untamed(0.1).unwrap();
    let u0 = SpectralField::single_mode(&b, [1, 0, 0], 0, Complex64::new(1.0, 0.0)).unwrap();
    let c = SolverConfig { advection: AdvectionForm::Off, ..cfg(0.1, 20.0) };
    let tr = run(&u0, &p, &c).unwrap();
    let rec = check_decay(&tr, DecayWindow::tail(&tr));
    assert!(rec.passed(), "{rec:?}");
    assert!((rec.details["exp_rate"].as_f64().unwrap() - 0.1).abs() < 1e-9);

    let mut flat = tr.clone();
    flat.h1.iter_mut().for_each(|h| *h = 1.0);
    assert_eq!(check_decay(&flat, DecayWindow::tail(&flat)).status, Status::Fail);
    assert_eq!(check_decay(&tr, DecayWindow { start: 19.9, end: 20.0 }).status, Status::Inconclusive);
}

#[test]
fn tame_time_limits_and_sweep() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let tr = run(&random_field(&b, 4, 60.0), &p, &cfg(0.005, 0.5)).unwrap();
    let sq: Vec<f64> = tr.sup.iter().map(|s| s * s).collect();
    let max = sq.iter().copied().fold(0.0, f64::max);
    let min = sq.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tame_time_measure(&tr, 2.0 * max);
    assert_eq!(hi.details["measure"].as_f64(), Some(0.0));
    let lo = tame_time_measure(&tr, 0.5 * min);
    assert!((lo.details["measure"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(lo.passed() && hi.passed());
    let n0 = 0.9 * sq[0];
    let sweep = tame_time_sweep(&tr, &[n0, 2.0 * n0, 4.0 * n0, 8.0 * n0], None);
    assert!(sweep.passed(), "{sweep:?}");
    assert_eq!(tame_time_sweep(&tr, &[2.0, 1.0], None).status, Status::Inconclusive);
}

#[test]
fn identical_inputs_give_identical_runs() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let u0 = random_field(&b, 4, 20.0);
    let rec = check_continuous_dependence(&u0, &u0, 2.0, 2.0, &p, &cfg(0.01, 0.1)).unwrap();
    assert!(rec.passed());
    let v0 = u0.axpy(1e-3, &random_field(&b, 5, 1.0)).unwrap();
    let rec = check_continuous_dependence(&u0, &v0, 2.0, 2.5, &p, &cfg(0.01, 0.1)).unwrap();
    assert_eq!(rec.status, Status::Info);
    assert!(rec.details["ratio"].as_f64().unwrap().is_finite());
}

#[test]
fn dependence_sweeps_scale_quadratically() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let u0 = random_field(&b, 6, 40.0);
    let dir = random_field(&b, 7, 1.0);
    let c = cfg(0.005, 0.2);
    let rec = perturbation_sweep(&u0, &dir, &[1e-2, 1e-3, 1e-4], &p, &c).unwrap();
    assert!(rec.passed(), "{rec:?}");
    let rec = threshold_sweep(&u0, &p, &[0.5, 0.25, 0.125], &c).unwrap();
    assert!(rec.passed(), "{rec:?}");
}

#[test]
fn signed_permutations() {
    let q = SignedPermutation::quarter_turn_z();
    assert_eq!(q.apply([1.0, 2.0, 3.0]), [-2.0, 1.0, 3.0]);
    assert_eq!(q.transpose_apply(q.apply([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0]);
    assert!(SignedPermutation::new([0, 0, 1], [1, 1, 1]).is_err());
    assert!(SignedPermutation::new([0, 1, 2], [1, 2, 1]).is_err());
    let b = torus(8);
    let u = random_field(&b, 1, 1.0);
    let r = q.transform(&u).unwrap();
    assert!((crate::norms::weighted_sq(&r, 0) - crate::norms::weighted_sq(&u, 0)).abs() < 1e-12);
    // four quarter turns are the identity
    let mut w = u.clone();
    for _ in 0..4 {
        w = q.transform(&w).unwrap();
    }
    assert!(w.max_abs_diff(&u).unwrap() < 1e-14);
    // grid check: (R u)(x) = Q^T u(Q x)
    let g = u.grid_samples().unwrap();
    let gr = r.grid_samples().unwrap();
    let n = 8usize;
    let idx = |i: [usize; 3]| (i[0] * n + i[1]) * n + i[2];
    for i in [[1usize, 2, 3], [5, 0, 7]] {
        let qi = [(n - i[1]) % n, i[0], i[2]];
        let v = [g.comps[0][idx(qi)], g.comps[1][idx(qi)], g.comps[2][idx(qi)]];
        let expect = q.transpose_apply(v);
        for d in 0..3 {
            assert!((gr.comps[d][idx(i)] - expect[d]).abs() < 1e-13);
        }
    }
}

#[test]
fn symmetry_suite() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 4.0).unwrap();
    let u0 = random_field(&b, 12, 80.0);
    let c = cfg(0.001, 0.05);
    let rot = check_rotation(&u0, &p, &c, &SignedPermutation::quarter_turn_z()).unwrap();
    assert!(rot.passed(), "{rot:?}");
    assert_eq!(rot.details["taming_active"], true);
    let refl = SignedPermutation::new([2, 0, 1], [1, -1, -1]).unwrap();
    assert!(check_rotation(&u0, &p, &c, &refl).unwrap().passed());

    let small = random_field(&b, 12, 1.0);
    assert!(check_galilean(&small, &p, &c, [0.0; 3]).unwrap().passed());
    let gal = check_galilean(&small, &p, &c, [0.3, -0.2, 0.1]).unwrap();
    assert!(gal.passed(), "{gal:?}");
    let gal_active = check_galilean(&u0, &p, &c, [0.3, -0.2, 0.1]).unwrap();
    assert_eq!(gal_active.status, Status::Info);

    let sc = check_scale(&u0, &p, &c).unwrap();
    assert!(sc.passed(), "{sc:?}");
    let p_off = p.clone().with_reference_offset([0.2, 0.0, -0.1]);
    let c_off = c.clone().with_mean_flow([0.2, 0.0, -0.1]);
    assert!(check_scale(&u0, &p_off, &c_off).unwrap().passed());
    let low = TamingParams::new(0.1, 1.0, 2.0).unwrap();
    assert!(check_scale(&u0, &low, &c).is_err());
}

#[test]
fn lq_moments() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 4.0).unwrap();
    let sub = run(&random_field(&b, 3, 1.0), &p, &cfg(0.01, 0.3)).unwrap();
    assert!(sub.g_value.iter().all(|&g| g == 0.0));
    let rec = lq_moment_report(&sub, 4.0, 2.0, 1.0, &p).unwrap();
    assert_eq!(rec.details["gronwall_holds"], true);
    assert_eq!(rec.details["inequality_holds"], true);
    let sup = run(&random_field(&b, 3, 80.0), &p, &cfg(0.002, 0.2)).unwrap();
    let sweep = lq_kappa_sweep(&sup, &[2.0, 4.0, 6.0], 2.0, &p).unwrap();
    assert_eq!(sweep.details["all_finite"], true);
    assert!(lq_moment_report(&sup, 1.0, 2.0, 1.0, &p).is_err());
}

#[test]
fn threshold_recursion_is_informational() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let rec = threshold_recursion(&random_field(&b, 3, 40.0), &p, &cfg(0.01, 0.1), 1.0, 6, 1e-6).unwrap();
    assert_eq!(rec.status, Status::Info);
    assert!(rec.details["sequence"].as_array().unwrap().len() >= 2);
}

#[test]
fn residual_orders() {
    let b = torus(8);
    let u0 = random_field(&b, 14, 30.0);
    let tamed = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let c = SolverConfig::new(0.004, 0.1, StepMode::Etd1);
    let rec = check_residual_order(&u0, &tamed, &c).unwrap();
    assert!(rec.passed(), "{rec:?}");
    // the valve is only Lipschitz in time, so second order needs it closed
    let open = TamingParams::new(0.1, 1.0, 1e6).unwrap();
    let c = SolverConfig::new(0.004, 0.1, StepMode::Etd2);
    let rec = check_residual_order(&u0, &open, &c).unwrap();
    assert!(rec.passed(), "{rec:?}");
    let rec = check_residual_order(&u0, &tamed, &c).unwrap();
    assert!(rec.details["integral_order"].as_f64().unwrap() > 1.7, "{rec:?}");
}

#[test]
fn vorticity_residual_without_taming_matches_untamed() {
    let b = torus(8);
    let u0 = random_field(&b, 2, 2.0);
    let c = cfg(0.01, 0.1);
    let untamed = TamingParams::untamed(0.1).unwrap();
    let tr = run(&u0, &untamed, &c).unwrap();
    let big = TamingParams::new(0.1, 1.0, 1e6).unwrap();
    let a = vorticity_residual_value(&tr, &untamed).unwrap().unwrap();
    let bb = vorticity_residual_value(&run(&u0, &big, &c).unwrap(), &big).unwrap().unwrap();
    assert_eq!(a, bb);
    let sparse = run(&u0, &untamed, &SolverConfig { keep_states: false, ..c.clone() }).unwrap();
    assert_eq!(vorticity_residual(&sparse, &untamed).unwrap().status, Status::Inconclusive);
}

#[test]
fn sup_ratio_is_informational() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 4.0).unwrap();
    let tr = run(&random_field(&b, 3, 5.0), &p, &cfg(0.01, 0.1)).unwrap();
    let rec = sup_ratio_report(&tr);
    assert_eq!(rec.status, Status::Info);
    assert!(rec.details["max_ratio"].as_f64().unwrap() > 0.0);
}
