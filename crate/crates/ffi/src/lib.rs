//! C ABI for the tamed Navier-Stokes solver.
//!
//! Every entry point returns a [`TnsStatus`]; on failure the message is kept
//! per thread and can be fetched with [`tns_last_error_message`]. Objects are
//! passed as opaque handles and must be released with the matching `_free`
//! function. Panics never cross the boundary and surface as
//! `TNS_STATUS_PANIC`.
//!
//! Coefficient buffers are interleaved `(re, im)` pairs, so a field with
//! `m` modes occupies `2 * m` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use tamed_ns::diagnostics::{check_energy, Status};
use tamed_ns::presets::{random_spectrum, taylor_green};
use tamed_ns::suite::{run_suite, SuiteConfig};
use tamed_ns::{norm, Error, NormKind, SolverConfig, SpectralField, StepMode, StokesBasis, TamingParams, TorusParams, Trajectory};

/// Result codes shared by all entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnsStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Domain = 3,
    Structural = 4,
    BlowUp = 5,
    NonConvergence = 6,
    BoundViolated = 7,
    Stiffness = 8,
    ResolutionCap = 9,
    Format = 10,
    Io = 11,
    CheckFailed = 12,
    Panic = 13,
}

/// Time-stepping scheme.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnsMode {
    Etd1 = 0,
    Etd2 = 1,
    Picard = 2,
}

/// Outcome of a check.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnsCheck {
    Pass = 0,
    Fail = 1,
    Info = 2,
    Inconclusive = 3,
}

/// One recorded row of a trajectory.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TnsSample {
    pub time: f64,
    pub l2: f64,
    pub h1: f64,
    /// `||A u||_{L2}`.
    pub h2: f64,
    pub sup: f64,
    pub g_value: f64,
    pub cum_diss_h1: f64,
    pub cum_diss_h2: f64,
}

/// A state on the periodic box together with its taming parameters.
pub struct TnsSolver {
    basis: Arc<StokesBasis>,
    params: TamingParams,
    state: SpectralField,
    time: f64,
}

/// Observables of a finished run.
pub struct TnsTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TnsStatus {
    match e {
        Error::Structural(_) => TnsStatus::Structural,
        Error::Domain(_) => TnsStatus::Domain,
        Error::Config(_) => TnsStatus::Config,
        Error::BlowUp { .. } => TnsStatus::BlowUp,
        Error::NonConvergence { .. } => TnsStatus::NonConvergence,
        Error::BoundViolated(_) => TnsStatus::BoundViolated,
        Error::Stiffness { .. } => TnsStatus::Stiffness,
        Error::ResolutionCap { .. } => TnsStatus::ResolutionCap,
        Error::Format(_) => TnsStatus::Format,
        Error::Io(_) => TnsStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
    Check(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TnsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TnsStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            TnsStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Check(msg))) => {
            set_error(msg);
            TnsStatus::CheckFailed
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TnsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Lib(Error::Config(format!("{what} is not valid UTF-8"))))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tns_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tns_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Create a solver on the `2*pi`-periodic box with `n` grid points per axis
/// and a zero state. Pass `threshold = INFINITY` for the untamed equation.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tns_solver_new(
    n: usize,
    nu: f64,
    kappa: f64,
    threshold: f64,
    out: *mut *mut TnsSolver,
) -> TnsStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = std::ptr::null_mut();
        let params = TamingParams::new(nu, kappa, threshold)?;
        let basis = StokesBasis::torus(TorusParams::new(n))?;
        let state = SpectralField::zeros(&basis);
        *out = Box::into_raw(Box::new(TnsSolver { basis, params, state, time: 0.0 }));
        Ok(())
    })
}

/// Release a solver. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a handle from [`tns_solver_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tns_solver_free(s: *mut TnsSolver) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of spectral modes.
///
/// # Safety
/// `s` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tns_solver_mode_count(s: *const TnsSolver, out: *mut usize) -> TnsStatus {
    guard(|| {
        let s = deref(s, "solver")?;
        *deref_mut(out, "out")? = s.basis.len();
        Ok(())
    })
}

/// Current time of the solver state.
///
/// # Safety
/// `s` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tns_solver_time(s: *const TnsSolver, out: *mut f64) -> TnsStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(s, "solver")?.time;
        Ok(())
    })
}

/// Replace the state by a random field with spectral slope `slope`,
/// normalized to `||grad u|| = h1`. Resets the time to zero.
///
/// # Safety
/// `s` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn tns_solver_set_random(s: *mut TnsSolver, seed: u64, slope: f64, h1: f64) -> TnsStatus {
    guard(|| {
        let s = deref_mut(s, "solver")?;
        s.state = random_spectrum(&s.basis, seed, slope, h1)?;
        s.time = 0.0;
        Ok(())
    })
}

/// Replace the state by the Taylor-Green vortex. Resets the time to zero.
///
/// # Safety
/// `s` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn tns_solver_set_taylor_green(s: *mut TnsSolver, amplitude: f64) -> TnsStatus {
    guard(|| {
        let s = deref_mut(s, "solver")?;
        s.state = taylor_green(&s.basis, amplitude)?;
        s.time = 0.0;
        Ok(())
    })
}

/// Copy the state coefficients into `buf`, which holds `len` doubles.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tns_solver_get_coefficients(s: *const TnsSolver, buf: *mut f64, len: usize) -> TnsStatus {
    guard(|| {
        let s = deref(s, "solver")?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let c = s.state.coeffs();
        if len != 2 * c.len() {
            return Err(Error::Structural(format!("buffer holds {len} doubles, state needs {}", 2 * c.len())).into());
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        for (pair, z) in out.chunks_exact_mut(2).zip(c) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(())
    })
}

/// Set the state from `len` interleaved doubles. Resets the time to zero.
///
/// # Safety
/// `buf` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn tns_solver_set_coefficients(s: *mut TnsSolver, buf: *const f64, len: usize) -> TnsStatus {
    guard(|| {
        let s = deref_mut(s, "solver")?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        if len != 2 * s.basis.len() {
            return Err(Error::Structural(format!("buffer holds {len} doubles, state needs {}", 2 * s.basis.len())).into());
        }
        let data = std::slice::from_raw_parts(buf, len);
        let coeffs = data.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        s.state = SpectralField::from_coeffs(&s.basis, coeffs)?;
        s.time = 0.0;
        Ok(())
    })
}

/// Norms of the current state: `out[0..4] = (L2, H1, H2, sup)`.
///
/// # Safety
/// `out` must point to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tns_solver_norms(s: *const TnsSolver, out: *mut f64) -> TnsStatus {
    guard(|| {
        let s = deref(s, "solver")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let out = std::slice::from_raw_parts_mut(out, 4);
        for (o, k) in out.iter_mut().zip([NormKind::L2, NormKind::H1, NormKind::H2, NormKind::Sup]) {
            *o = norm(&s.state, k)?;
        }
        Ok(())
    })
}

/// Advance the state by `horizon` with step `dt`, recording every
/// `cadence` steps. On success the solver holds the final state and
/// `*out_traj` a new trajectory handle; on failure the state is unchanged.
///
/// # Safety
/// `s` must be a valid handle and `out_traj` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tns_solver_run(
    s: *mut TnsSolver,
    dt: f64,
    horizon: f64,
    mode: TnsMode,
    cadence: usize,
    out_traj: *mut *mut TnsTrajectory,
) -> TnsStatus {
    guard(|| {
        let out = deref_mut(out_traj, "out_traj")?;
        *out = std::ptr::null_mut();
        let s = deref_mut(s, "solver")?;
        let mode = match mode {
            TnsMode::Etd1 => StepMode::Etd1,
            TnsMode::Etd2 => StepMode::Etd2,
            TnsMode::Picard => StepMode::Picard,
        };
        let mut cfg = SolverConfig::new(dt, horizon, mode).with_cadence(cadence);
        cfg.keep_states = false;
        let traj = tamed_ns::run(&s.state, &s.params, &cfg)?;
        let last = traj
            .final_state()
            .cloned()
            .ok_or_else(|| Error::Structural("run produced no final state".into()))?;
        s.state = last;
        s.time += traj.horizon();
        *out = Box::into_raw(Box::new(TnsTrajectory { inner: traj }));
        Ok(())
    })
}

/// Release a trajectory. NULL is ignored.
///
/// # Safety
/// `t` must be NULL or a handle from [`tns_solver_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tns_trajectory_free(t: *mut TnsTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of recorded rows.
///
/// # Safety
/// `t` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tns_trajectory_len(t: *const TnsTrajectory, out: *mut usize) -> TnsStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(t, "trajectory")?.inner.len();
        Ok(())
    })
}

/// Recorded row `i`.
///
/// # Safety
/// `t` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tns_trajectory_get(t: *const TnsTrajectory, i: usize, out: *mut TnsSample) -> TnsStatus {
    guard(|| {
        let tr = &deref(t, "trajectory")?.inner;
        let out = deref_mut(out, "out")?;
        if i >= tr.len() {
            return Err(Error::Domain(format!("row {i} out of range (len {})", tr.len())).into());
        }
        *out = TnsSample {
            time: tr.times[i],
            l2: tr.l2[i],
            h1: tr.h1[i],
            h2: tr.h2[i],
            sup: tr.sup[i],
            g_value: tr.g_value[i],
            cum_diss_h1: tr.cum_diss_h1[i],
            cum_diss_h2: tr.cum_diss_h2[i],
        };
        Ok(())
    })
}

/// Write the trajectory as CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tns_trajectory_save_csv(t: *const TnsTrajectory, path: *const c_char) -> TnsStatus {
    guard(|| {
        let tr = &deref(t, "trajectory")?.inner;
        let path = c_str(path, "path")?;
        tr.save_csv(Path::new(path))?;
        Ok(())
    })
}

/// Run the energy-inequality check. `out_margin` may be NULL.
///
/// # Safety
/// `t` and `out_check` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tns_trajectory_check_energy(
    t: *const TnsTrajectory,
    out_check: *mut TnsCheck,
    out_margin: *mut f64,
) -> TnsStatus {
    guard(|| {
        let tr = &deref(t, "trajectory")?.inner;
        let out_check = deref_mut(out_check, "out_check")?;
        let rec = check_energy(tr);
        *out_check = match rec.status {
            Status::Pass => TnsCheck::Pass,
            Status::Fail => TnsCheck::Fail,
            Status::Info => TnsCheck::Info,
            Status::Inconclusive => TnsCheck::Inconclusive,
        };
        if let Some(m) = out_margin.as_mut() {
            *m = rec.margin;
        }
        Ok(())
    })
}

/// Run verification groups at resolution `n` and return the JSON report in
/// `*out_json` (release with [`tns_string_free`]). `groups` is a
/// comma-separated list, or NULL for all groups. Returns
/// `TNS_STATUS_CHECK_FAILED` when any check fails; the report is still
/// produced.
///
/// # Safety
/// `groups` must be NULL or NUL-terminated; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tns_run_suite(n: usize, seed: u64, groups: *const c_char, out_json: *mut *mut c_char) -> TnsStatus {
    guard(|| {
        let out = deref_mut(out_json, "out_json")?;
        *out = std::ptr::null_mut();
        let sel: Option<Vec<String>> = if groups.is_null() {
            None
        } else {
            Some(
                c_str(groups, "groups")?
                    .split(',')
                    .map(|g| g.trim().to_string())
                    .filter(|g| !g.is_empty())
                    .collect(),
            )
        };
        let cfg = SuiteConfig { n, seed, ..SuiteConfig::default() };
        let report = run_suite(&cfg, sel.as_deref())?;
        let json = CString::new(report.to_json()).map_err(|e| Error::Format(e.to_string()))?;
        *out = json.into_raw();
        let failed = report.failures();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Fail::Check(format!("failed checks: {}", failed.join(", "))))
        }
    })
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `p` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tns_string_free(p: *mut c_char) {
    if !p.is_null() {
        drop(CString::from_raw(p));
    }
}
