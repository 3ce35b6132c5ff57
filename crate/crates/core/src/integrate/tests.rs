use std::sync::Arc;

use super::*;
use crate::basis::{StokesBasis, TorusParams};
use crate::norms::weighted_sq;
use crate::operators::apply_semigroup;
use crate::testutil::random_field;

fn torus(n: usize) -> Arc<StokesBasis> {
    StokesBasis::torus(TorusParams::new(n)).unwrap()
}

fn h1_dist(a: &SpectralField, b: &SpectralField) -> f64 {
    weighted_sq(&(a - b), 1).sqrt()
}

#[test]
fn phi_functions_match_closed_form() {
    assert_eq!(phi1(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
    assert_eq!(phi2(Complex64::new(0.0, 0.0)), Complex64::new(0.5, 0.0));
    for z in [Complex64::new(-0.0999, 0.0), Complex64::new(0.05, -0.08), Complex64::new(-0.1001, 0.0)] {
        // Taylor coefficients checked against a long direct expansion
        let mut p1 = Complex64::new(0.0, 0.0);
        let mut p2 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for j in 0..40 {
            p1 += term / (j + 1) as f64;
            p2 += term / ((j + 1) * (j + 2)) as f64;
            term = term * z / (j + 1) as f64;
        }
        assert!((phi1(z) - p1).norm() < 1e-14, "{z}");
        assert!((phi2(z) - p2).norm() < 1e-13, "{z}");
    }
    let z = Complex64::new(-3.0, 0.0);
    assert!((phi1(z).re - (1.0 - (-3.0f64).exp()) / 3.0).abs() < 1e-15);
}

#[test]
fn time_grid_lands_on_horizon() {
    assert_eq!(time_grid(0.25, 1.0), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    let g = time_grid(0.3, 1.0);
    assert_eq!(g.len(), 5);
    assert_eq!(*g.last().unwrap(), 1.0);
    assert_eq!(time_grid(1e-3, 1.0).len(), 1001);
    assert_eq!(time_grid(0.1, 0.0), vec![0.0]);
}

#[test]
fn config_validation() {
    let mut c = SolverConfig::default();
    assert!(c.validate().is_ok());
    c.dt = 0.0;
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    let c = SolverConfig { picard_max_iter: 0, ..Default::default() };
    assert!(c.validate().is_err());
    assert_eq!("ETD2".parse::<StepMode>().unwrap(), StepMode::Etd2);
    assert!("rk4".parse::<StepMode>().is_err());
}

#[test]
fn zero_data_stays_zero() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 4.0).unwrap();
    for mode in [StepMode::Etd1, StepMode::Etd2, StepMode::Picard] {
        let cfg = SolverConfig::new(0.01, 0.1, mode);
        let tr = run(&SpectralField::zeros(&b), &p, &cfg).unwrap();
        assert!(tr.is_well_formed());
        assert_eq!(tr.len(), 11);
        assert!(tr.states.iter().all(|s| s.is_zero()));
        assert!(tr.l2.iter().chain(&tr.cum_diss_h1).all(|&x| x == 0.0));
    }
    let cfg = SolverConfig::new(0.01, 0.1, StepMode::Picard);
    let out = picard_solve(&SpectralField::zeros(&b), &p, &cfg, 0.1).unwrap();
    assert_eq!(out.iterations, 2);
}

#[test]
fn linear_stokes_mode_decays_exactly() {
    let b = torus(8);
    let p = TamingParams::untamed(0.1).unwrap();
    let u0 = SpectralField::single_mode(&b, [1, 2, 0], 1, Complex64::new(0.3, -0.2)).unwrap();
    let cfg = SolverConfig { advection: AdvectionForm::Off, ..SolverConfig::new(0.05, 1.0, StepMode::Etd2) };
    let tr = run(&u0, &p, &cfg).unwrap();
    let exact = apply_semigroup(0.1, &u0).unwrap();
    assert!(tr.final_state().unwrap().max_abs_diff(&exact).unwrap() < 1e-15);
    let one = etd_step(&u0, &p, 0.05, StepMode::Etd1).unwrap();
    // a single mode is a steady shear flow: B(u, u) vanishes identically
    assert!(one.max_abs_diff(&apply_semigroup(0.005, &u0).unwrap()).unwrap() < 1e-15);
}

#[test]
fn cadence_and_states() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 4.0).unwrap();
    let u0 = random_field(&b, 3, 1.0);
    let cfg = SolverConfig::new(0.01, 0.1, StepMode::Etd2).with_cadence(3);
    let tr = run(&u0, &p, &cfg).unwrap();
    assert_eq!(tr.times, vec![0.0, 0.03, 0.06, 0.09, 0.1]);
    assert_eq!(tr.steps, 10);
    assert!(tr.is_well_formed());
    let cfg1 = SolverConfig::new(0.01, 0.1, StepMode::Etd2);
    let full = run(&u0, &p, &cfg1).unwrap();
    assert_eq!(full.final_state(), tr.final_state());
    assert_eq!(full.cum_diss_h1.last(), tr.cum_diss_h1.last());
}

fn self_convergence(mode: StepMode) -> f64 {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let u0 = random_field(&b, 11, 2.0);
    let finals: Vec<SpectralField> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| run(&u0, &p, &SolverConfig::new(dt, 0.4, mode)).unwrap().final_state().unwrap().clone())
        .collect();
    let e1 = h1_dist(&finals[0], &finals[1]);
    let e2 = h1_dist(&finals[1], &finals[2]);
    (e1 / e2).log2()
}

#[test]
fn etd_convergence_orders() {
    let o1 = self_convergence(StepMode::Etd1);
    let o2 = self_convergence(StepMode::Etd2);
    assert!((o1 - 1.0).abs() < 0.3, "ETD1 order {o1}");
    assert!((o2 - 2.0).abs() < 0.3, "ETD2 order {o2}");
}

#[test]
fn deterministic() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let u0 = random_field(&b, 5, 3.0);
    let cfg = SolverConfig::new(0.01, 0.2, StepMode::Etd2);
    let a = run(&u0, &p, &cfg).unwrap();
    let b2 = run(&u0, &p, &cfg).unwrap();
    assert_eq!(a.states, b2.states);
    assert_eq!(a.sup, b2.sup);
}

#[test]
fn huge_threshold_matches_untamed_bitwise() {
    let b = torus(8);
    let u0 = random_field(&b, 8, 2.0);
    let cfg = SolverConfig::new(0.01, 0.3, StepMode::Etd2);
    let untamed = run(&u0, &TamingParams::untamed(0.1).unwrap(), &cfg).unwrap();
    let max_sq = untamed.sup.iter().fold(0.0f64, |a, s| a.max(s * s));
    let tamed = run(&u0, &TamingParams::new(0.1, 1.0, 10.0 * max_sq.max(1.0)).unwrap(), &cfg).unwrap();
    assert_eq!(tamed.states, untamed.states);
    assert!(tamed.g_value.iter().all(|&g| g == 0.0));
}

#[test]
fn taming_engages_above_threshold() {
    let b = torus(8);
    let u0 = random_field(&b, 8, 60.0);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let tr = run(&u0, &p, &SolverConfig::new(0.005, 0.1, StepMode::Etd2)).unwrap();
    assert!(tr.sup[0].powi(2) > 1.0);
    assert!(tr.g_value[0] > 0.0);
    assert!((tr.g_value[0] - (tr.sup[0].powi(2) - 1.0) / 0.1).abs() < 1e-9 * tr.g_value[0]);
}

#[test]
fn discrete_energy_inequality() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let u0 = random_field(&b, 21, 3.0);
    let tr = run(&u0, &p, &SolverConfig::new(0.002, 0.5, StepMode::Etd2)).unwrap();
    let e0 = tr.l2[0].powi(2);
    for i in 0..tr.len() {
        let lhs = tr.l2[i].powi(2) + 2.0 * p.nu * tr.cum_diss_h1[i];
        assert!(lhs <= e0 + 2.0 * 2.0 * p.nu * tr.quad_err_h1[i] + 1e-12, "t = {}: {lhs} > {e0}", tr.times[i]);
    }
}

#[test]
fn picard_second_iterate_is_stokes_flow() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let u0 = random_field(&b, 2, 2.0);
    let times = time_grid(0.01, 0.2);
    let zero = vec![SpectralField::zeros(&b); times.len()];
    let w = picard_sweep(&u0, &zero, &times, &p, AdvectionForm::Convective).unwrap();
    for (t, s) in times.iter().zip(&w) {
        let exact = apply_semigroup(p.nu * t, &u0).unwrap();
        assert!(h1_dist(s, &exact) < 1e-13, "t = {t}");
    }
}

#[test]
fn picard_matches_etd2_subcritical() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 4.0).unwrap();
    let u0 = random_field(&b, 4, 0.5);
    let cfg = SolverConfig { picard_tol: 1e-10, ..SolverConfig::new(0.01, 0.5, StepMode::Picard) };
    let out = picard_solve(&u0, &p, &cfg, 0.5).unwrap();
    assert!(out.iterations <= 15, "{} iterations", out.iterations);
    assert!(out.energy_margin.unwrap() >= 0.0);
    let direct = run(&u0, &p, &SolverConfig::new(0.01, 0.5, StepMode::Etd2)).unwrap();
    let gap = out
        .trajectory
        .states
        .iter()
        .zip(&direct.states)
        .map(|(a, b)| h1_dist(a, b))
        .fold(0.0, f64::max);
    assert!(gap < 1e-6, "gap {gap}");
}

#[test]
fn picard_windows_and_nonconvergence() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let u0 = random_field(&b, 4, 1.0);
    let cfg = SolverConfig { picard_window: Some(0.1), ..SolverConfig::new(0.01, 0.3, StepMode::Picard) };
    let tr = run(&u0, &p, &cfg).unwrap();
    assert_eq!(tr.len(), 31);
    assert!(tr.is_well_formed());
    let cfg = SolverConfig { picard_max_iter: 2, ..cfg };
    assert!(matches!(run(&u0, &p, &cfg), Err(Error::NonConvergence { iterations: 2, .. })));
}

#[test]
fn cfl_control_respects_bound() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let u0 = random_field(&b, 4, 4.0);
    let cfg = SolverConfig { dt_control: DtControl::Cfl(0.2), ..SolverConfig::new(0.05, 0.2, StepMode::Etd2) };
    let tr = run(&u0, &p, &cfg).unwrap();
    assert!(tr.is_well_formed());
    assert_eq!(*tr.times.last().unwrap(), 0.2);
    let h = b.torus_basis().unwrap().spacing();
    for i in 0..tr.len() - 1 {
        assert!(tr.times[i + 1] - tr.times[i] <= 0.2 * h / tr.sup[i] + 1e-15);
    }
}

#[test]
fn mean_flow_must_match_reference_offset() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let u0 = random_field(&b, 4, 1.0);
    let cfg = SolverConfig::new(0.01, 0.1, StepMode::Etd2).with_mean_flow([0.5, 0.0, 0.0]);
    assert!(matches!(run(&u0, &p, &cfg), Err(Error::Config(_))));
    let p = p.with_reference_offset([0.5, 0.0, 0.0]);
    assert!(run(&u0, &p, &cfg).is_ok());
}

#[test]
fn blowup_guard_reports_time() {
    let b = torus(8);
    let p = TamingParams::untamed(0.1).unwrap();
    let mut u0 = random_field(&b, 4, 1.0);
    u0.coeffs_mut()[0] = Complex64::new(f64::NAN, 0.0);
    assert!(matches!(
        run(&u0, &p, &SolverConfig::default()),
        Err(Error::Domain(_))
    ));
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let u0 = random_field(&b, 4, 50.0);
    let cfg = SolverConfig { blowup_factor: 2.0, ..SolverConfig::new(0.01, 0.1, StepMode::Etd2) };
    assert!(matches!(run(&u0, &p, &cfg), Err(Error::BlowUp { last_finite_time, .. }) if last_finite_time == 0.0));
}

#[test]
fn csv_export() {
    let b = torus(8);
    let p = TamingParams::new(0.1, 1.0, 1.0).unwrap();
    let tr = run(&random_field(&b, 1, 1.0), &p, &SolverConfig::new(0.05, 0.1, StepMode::Etd2)).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1].split(',').next().unwrap().parse::<f64>().unwrap(), 0.0);
    assert_eq!(lines[3].split(',').count(), 8);
}
