use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use tamed_ns_ffi::*;

fn last_error() -> String {
    let p = tns_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn solver(n: usize, threshold: f64) -> *mut TnsSolver {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { tns_solver_new(n, 0.1, 1.0, threshold, &mut s) }, TnsStatus::Ok);
    assert!(!s.is_null());
    s
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(tns_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_handles_are_reported() {
    unsafe {
        let mut n = 0usize;
        assert_eq!(tns_solver_mode_count(ptr::null(), &mut n), TnsStatus::NullPointer);
        assert!(last_error().contains("solver"));
        assert_eq!(tns_solver_new(8, 0.1, 1.0, 1.0, ptr::null_mut()), TnsStatus::NullPointer);
        let mut t = ptr::null_mut();
        assert_eq!(tns_solver_run(ptr::null_mut(), 0.01, 0.1, TnsMode::Etd2, 1, &mut t), TnsStatus::NullPointer);
        assert!(t.is_null());
        assert_eq!(tns_trajectory_len(ptr::null(), &mut n), TnsStatus::NullPointer);
        tns_solver_free(ptr::null_mut());
        tns_trajectory_free(ptr::null_mut());
        tns_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_parameters_map_to_error_codes() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(tns_solver_new(8, -1.0, 1.0, 1.0, &mut s), TnsStatus::Domain);
        assert!(s.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(tns_solver_new(8, 0.1, 0.5, 1.0, &mut s), TnsStatus::Domain);

        let s = solver(8, 1.0);
        let mut t = ptr::null_mut();
        assert_eq!(tns_solver_run(s, -0.1, 1.0, TnsMode::Etd2, 1, &mut t), TnsStatus::Config);
        assert!(t.is_null());
        let mut buf = vec![0.0; 3];
        assert_eq!(tns_solver_get_coefficients(s, buf.as_mut_ptr(), buf.len()), TnsStatus::Structural);
        assert_eq!(tns_solver_set_coefficients(s, buf.as_ptr(), buf.len()), TnsStatus::Structural);
        tns_solver_free(s);
    }
}

#[test]
fn error_message_is_per_thread() {
    unsafe {
        let mut n = 0usize;
        assert_eq!(tns_solver_mode_count(ptr::null(), &mut n), TnsStatus::NullPointer);
    }
    let other = std::thread::spawn(|| tns_last_error_message().is_null()).join().unwrap();
    assert!(other);
    assert!(last_error().contains("null pointer"));
}

#[test]
fn coefficients_round_trip() {
    unsafe {
        let s = solver(8, 1.0);
        let mut m = 0usize;
        assert_eq!(tns_solver_mode_count(s, &mut m), TnsStatus::Ok);
        assert!(m > 0);
        assert_eq!(tns_solver_set_random(s, 3, 1.0, 2.0), TnsStatus::Ok);
        let mut a = vec![0.0; 2 * m];
        assert_eq!(tns_solver_get_coefficients(s, a.as_mut_ptr(), a.len()), TnsStatus::Ok);
        let mut norms = [0.0; 4];
        assert_eq!(tns_solver_norms(s, norms.as_mut_ptr()), TnsStatus::Ok);
        assert!((norms[1] - 2.0).abs() < 1e-12);

        let s2 = solver(8, 1.0);
        assert_eq!(tns_solver_set_coefficients(s2, a.as_ptr(), a.len()), TnsStatus::Ok);
        let mut b = vec![0.0; 2 * m];
        assert_eq!(tns_solver_get_coefficients(s2, b.as_mut_ptr(), b.len()), TnsStatus::Ok);
        assert_eq!(a, b);
        tns_solver_free(s);
        tns_solver_free(s2);
    }
}

#[test]
fn run_advances_state_and_records_samples() {
    unsafe {
        let s = solver(8, 1.0);
        assert_eq!(tns_solver_set_taylor_green(s, 1.0), TnsStatus::Ok);
        let mut t = ptr::null_mut();
        assert_eq!(tns_solver_run(s, 0.01, 0.1, TnsMode::Etd2, 2, &mut t), TnsStatus::Ok);
        let mut time = 0.0;
        assert_eq!(tns_solver_time(s, &mut time), TnsStatus::Ok);
        assert!((time - 0.1).abs() < 1e-12);

        let mut len = 0usize;
        assert_eq!(tns_trajectory_len(t, &mut len), TnsStatus::Ok);
        assert_eq!(len, 6);
        let mut first = TnsSample::default();
        let mut last = TnsSample::default();
        assert_eq!(tns_trajectory_get(t, 0, &mut first), TnsStatus::Ok);
        assert_eq!(tns_trajectory_get(t, len - 1, &mut last), TnsStatus::Ok);
        assert_eq!(first.time, 0.0);
        assert!((last.time - 0.1).abs() < 1e-12);
        assert!(last.l2 < first.l2);
        assert_eq!(tns_trajectory_get(t, len, &mut last), TnsStatus::Domain);

        let mut norms = [0.0; 4];
        assert_eq!(tns_solver_norms(s, norms.as_mut_ptr()), TnsStatus::Ok);
        let mut end = TnsSample::default();
        tns_trajectory_get(t, len - 1, &mut end);
        assert!((norms[0] - end.l2).abs() < 1e-12 * end.l2);

        let mut check = TnsCheck::Fail;
        let mut margin = f64::NAN;
        assert_eq!(tns_trajectory_check_energy(t, &mut check, &mut margin), TnsStatus::Ok);
        assert_eq!(check, TnsCheck::Pass);
        assert!(margin >= 0.0);
        assert_eq!(tns_trajectory_check_energy(t, &mut check, ptr::null_mut()), TnsStatus::Ok);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(tns_trajectory_save_csv(t, cpath.as_ptr()), TnsStatus::Ok);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), len + 1);
        assert!(text.starts_with("time,l2,h1"));

        tns_trajectory_free(t);
        tns_solver_free(s);
    }
}

#[test]
fn failed_run_leaves_state_untouched() {
    unsafe {
        let s = solver(8, f64::INFINITY);
        assert_eq!(tns_solver_set_random(s, 1, 1.0, 1.0), TnsStatus::Ok);
        let mut before = [0.0; 4];
        tns_solver_norms(s, before.as_mut_ptr());
        let mut t = ptr::null_mut();
        assert_eq!(tns_solver_run(s, f64::NAN, 0.1, TnsMode::Etd1, 1, &mut t), TnsStatus::Config);
        let mut after = [0.0; 4];
        tns_solver_norms(s, after.as_mut_ptr());
        assert_eq!(before, after);
        tns_solver_free(s);
    }
}

#[test]
fn suite_group_returns_json() {
    unsafe {
        let groups = CString::new("picard").unwrap();
        let mut json = ptr::null_mut();
        assert_eq!(tns_run_suite(8, 2024, groups.as_ptr(), &mut json), TnsStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        tns_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(text.contains("picard_convergence"), "{v}");

        let bad = CString::new("nope").unwrap();
        assert_eq!(tns_run_suite(8, 2024, bad.as_ptr(), &mut json), TnsStatus::Config);
        assert!(json.is_null());
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tamed_ns.h")).unwrap();
    for name in [
        "tns_version",
        "tns_last_error_message",
        "tns_solver_new",
        "tns_solver_free",
        "tns_solver_mode_count",
        "tns_solver_time",
        "tns_solver_set_random",
        "tns_solver_set_taylor_green",
        "tns_solver_get_coefficients",
        "tns_solver_set_coefficients",
        "tns_solver_norms",
        "tns_solver_run",
        "tns_trajectory_free",
        "tns_trajectory_len",
        "tns_trajectory_get",
        "tns_trajectory_save_csv",
        "tns_trajectory_check_energy",
        "tns_run_suite",
        "tns_string_free",
        "typedef struct TnsSolver TnsSolver",
        "TNS_STATUS_BLOW_UP = 5",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "tamed_ns.h"
int main(void) {
    TnsSolver *s = NULL;
    TnsTrajectory *t = NULL;
    TnsSample row;
    if (tns_solver_new(8, 0.1, 1.0, 1.0, &s) != TNS_STATUS_OK) return 1;
    tns_solver_set_taylor_green(s, 1.0);
    tns_solver_run(s, 0.01, 0.1, TNS_MODE_ETD2, 1, &t);
    tns_trajectory_get(t, 0, &row);
    tns_trajectory_free(t);
    tns_solver_free(s);
    return row.time == 0.0 ? 0 : 1;
}
"#,
    )
    .unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
