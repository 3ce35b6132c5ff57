//! Batch front end for the `tns` binary.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 the run blew up
//! or an iteration failed to converge, 3 an asserted check failed.

pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use log::{info, warn};

use crate::attractor::{check_absorbing, check_tail_compactness, integrate_ensemble, sample_attractor};
use crate::basis::StokesBasis;
use crate::checkpoint;
use crate::diagnostics::{self as diag, CheckRecord, DecayWindow, DiagnosticsReport, Status};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::integrate::{run, Trajectory};
use crate::io::{fmt_f64, write_atomic};
use crate::norms::weighted_sq;
use crate::suite::run_suite;

pub use config::{ConfigFile, RunConfig, SweepAxis, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tns", version, about = "Tamed Navier-Stokes solver and verification harness")]
pub struct Cli {
    /// Configuration file (flat key = value).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides output.dir.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps and ensembles.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Seed for every random draw; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated checks (run, sweep) or groups (verify).
    #[arg(long, global = true, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write CSV, checkpoint and report.
    Run,
    /// One run per value along a parameter axis.
    Sweep {
        /// N, kappa, nu, dt or n; overrides sweep.axis.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values; overrides sweep.values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Run the assertion suite.
    Verify,
    /// Ensemble absorbing-set and tail checks plus a snapshot dataset.
    Attractor,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BlowUp { .. } | Error::NonConvergence { .. } | Error::Stiffness { .. } => EXIT_RUNTIME,
        Error::BoundViolated(_) => EXIT_CHECK,
        _ => EXIT_CONFIG,
    }
}

fn init_logging() {
    let env = env_logger::Env::default().filter_or("TNS_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parse `args` (program name first) and execute. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ConfigFile> {
    match &cli.config {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::empty("<defaults>")),
    }
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    if cli.config.is_none() {
        return Err(Error::Config("this command needs --config".into()));
    }
    let mut cfg = RunConfig::from_file(&load_config(cli)?)?;
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(checks) = &cli.checks {
        config::validate_checks(checks).map_err(Error::Config)?;
        cfg.checks = checks.clone();
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Run => {
            let cfg = run_config(cli)?;
            let out = cmd_run(&cfg, &cfg.out_dir)?;
            Ok(report_exit(&out.report))
        }
        Command::Sweep { axis, values } => {
            let mut cfg = run_config(cli)?;
            if let Some(a) = axis {
                let values = values.clone().ok_or_else(|| Error::Config("--axis needs --values".into()))?;
                cfg.sweep = Some(SweepSpec { axis: a.parse()?, values });
            } else if let (Some(v), Some(s)) = (values, cfg.sweep.as_mut()) {
                s.values = v.clone();
            }
            let spec = cfg.sweep.clone().ok_or_else(|| Error::Config("no sweep axis: set sweep.axis or --axis".into()))?;
            let out_dir = cfg.out_dir.clone();
            cmd_sweep(&cfg, &spec, &out_dir, cli.jobs)
        }
        Command::Verify => {
            let file = load_config(cli)?;
            let mut suite = config::suite_from_file(&file)?;
            if let Some(s) = cli.seed {
                suite.seed = s;
            }
            suite.jobs = cli.jobs;
            let out = cli.out.clone().or_else(|| file.raw("output.dir").map(PathBuf::from));
            cmd_verify(&suite, cli.checks.as_deref(), out.as_deref())
        }
        Command::Attractor => {
            let cfg = run_config(cli)?;
            cmd_attractor(&cfg, &cfg.out_dir, cli.jobs)
        }
    }
}

fn report_exit(report: &DiagnosticsReport) -> i32 {
    let failed = report.failures();
    if failed.is_empty() {
        EXIT_OK
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        EXIT_CHECK
    }
}

/// Result of one configured run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub final_state: SpectralField,
    pub report: DiagnosticsReport,
}

fn run_checks(cfg: &RunConfig, tr: &Trajectory) -> Result<Vec<CheckRecord>> {
    let p = &cfg.taming;
    let mut out = Vec::new();
    for c in &cfg.checks {
        out.push(match c.as_str() {
            "energy" => diag::check_energy(tr),
            "gradient" => diag::check_gradient_bound(tr, p),
            "decay" => diag::check_decay(tr, DecayWindow::tail(tr)),
            "tame_time" => diag::tame_time_measure(tr, p.threshold),
            "sup_ratio" => diag::sup_ratio_report(tr),
            "vorticity" => diag::vorticity_residual(tr, p)?,
            "lq_moment" => diag::lq_moment_report(tr, 4.0, 2.0, p.kappa, p)?,
            other => return Err(Error::Config(format!("unknown check '{other}'"))),
        });
    }
    Ok(out)
}

fn run_metadata(cfg: &RunConfig, report: DiagnosticsReport) -> DiagnosticsReport {
    report
        .with_meta("version", env!("CARGO_PKG_VERSION"))
        .with_meta("n", cfg.torus.n)
        .with_meta("length", cfg.torus.length)
        .with_meta("nu", cfg.taming.nu)
        .with_meta("kappa", cfg.taming.kappa)
        .with_meta("threshold", diag::num(cfg.taming.threshold))
        .with_meta("dt", cfg.solver.dt)
        .with_meta("horizon", cfg.solver.horizon)
        .with_meta("mode", format!("{:?}", cfg.solver.mode).to_lowercase())
        .with_meta("initial", cfg.initial.name())
        .with_meta("seed", cfg.seed)
}

/// Integrate, check and write `trajectory.csv`, `final.ckpt` and
/// `report.json` into `out`.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<RunOutput> {
    let basis = StokesBasis::torus(cfg.torus)?;
    let u0 = cfg.initial.build(&basis)?;
    let mut solver = cfg.solver.clone();
    solver.keep_states = cfg.checks.iter().any(|c| c == "vorticity");
    info!("run: n = {}, {:?}, T = {}", cfg.torus.n, solver.mode, solver.horizon);
    let tr = run(&u0, &cfg.taming, &solver)?;
    let final_state = tr.final_state().cloned().ok_or_else(|| Error::Structural("empty trajectory".into()))?;
    let mut report = run_metadata(cfg, DiagnosticsReport::new()).with_meta("steps", tr.steps);
    for rec in run_checks(cfg, &tr)? {
        report.push(rec)?;
    }
    std::fs::create_dir_all(out)?;
    tr.save_csv(&out.join("trajectory.csv"))?;
    write_atomic(&out.join("final.ckpt"), |w| checkpoint::save(&final_state, w))?;
    write_report(&report, &out.join("report.json"))?;
    Ok(RunOutput { trajectory: tr, final_state, report })
}

fn write_report(report: &DiagnosticsReport, path: &Path) -> Result<()> {
    let json = report.to_json();
    write_atomic(path, |w| Ok(writeln!(w, "{json}")?))
}

fn apply_axis(cfg: &RunConfig, axis: SweepAxis, value: f64) -> Result<RunConfig> {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::Threshold => c.taming = c.taming.with_threshold(value)?,
        SweepAxis::Kappa => c.taming = c.taming.with_kappa(value)?,
        SweepAxis::Nu => {
            c.taming.nu = value;
            c.taming.validate()?;
        }
        SweepAxis::Dt => c.solver.dt = value,
        SweepAxis::N => {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(Error::Config(format!("grid size must be a positive integer, got {value}")));
            }
            c.torus.n = value as usize;
        }
    }
    c.solver.validate()?;
    Ok(c)
}

pub const SWEEP_HEADER: &str =
    "index,axis,value,status,steps,final_l2,final_h1,max_sup,tame_time_measure,energy_margin,gradient_margin,order";

fn margin_of(report: &DiagnosticsReport, name: &str) -> String {
    report.get(name).map(|r| fmt_f64(r.margin)).unwrap_or_default()
}

/// Self-convergence order from three consecutive dt values.
fn sweep_orders(values: &[f64], finals: &[&SpectralField]) -> Vec<Option<f64>> {
    (0..finals.len())
        .map(|i| {
            if i + 2 >= finals.len() {
                return None;
            }
            let e1 = weighted_sq(&(finals[i] - finals[i + 1]), 0).sqrt();
            let e2 = weighted_sq(&(finals[i + 1] - finals[i + 2]), 0).sqrt();
            let r = values[i] / values[i + 1];
            (e1 > 0.0 && e2 > 0.0 && r > 1.0).then(|| (e1 / e2).ln() / r.ln())
        })
        .collect()
}

/// One run per value into `out/run_XXX`, plus `out/summary.csv`. The first
/// failing run ends the summary with an `error` row and its error is
/// returned.
pub fn cmd_sweep(cfg: &RunConfig, spec: &SweepSpec, out: &Path, jobs: usize) -> Result<i32> {
    if spec.values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs: Vec<Result<RunConfig>> = spec.values.iter().map(|&v| apply_axis(cfg, spec.axis, v)).collect();
    let next = AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<RunOutput>>>> =
        (0..configs.len()).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, configs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let res = match &configs[i] {
                    Ok(c) => cmd_run(c, &out.join(format!("run_{i:03}"))),
                    Err(e) => Err(Error::Config(e.to_string())),
                };
                *slots[i].lock().expect("sweep slot") = Some(res);
            });
        }
    });
    let results: Vec<Result<RunOutput>> =
        slots.into_iter().map(|m| m.into_inner().expect("sweep slot").expect("every run finished")).collect();
    let first_err = results.iter().position(|r| r.is_err());
    let ok: Vec<&RunOutput> = results.iter().take(first_err.unwrap_or(results.len())).map(|r| r.as_ref().unwrap()).collect();
    let orders = if spec.axis == SweepAxis::Dt {
        sweep_orders(&spec.values, &ok.iter().map(|o| &o.final_state).collect::<Vec<_>>())
    } else {
        vec![None; ok.len()]
    };
    let mut lines = vec![SWEEP_HEADER.to_string()];
    let mut any_failed = false;
    for (i, o) in ok.iter().enumerate() {
        let tr = &o.trajectory;
        let last = tr.len() - 1;
        let max_sup = tr.sup.iter().copied().fold(0.0, f64::max);
        let tame = diag::tame_time_measure(tr, apply_axis(cfg, spec.axis, spec.values[i])?.taming.threshold);
        let failed = !o.report.failures().is_empty();
        any_failed |= failed;
        lines.push(format!(
            "{i},{},{},{},{},{},{},{},{},{},{},{}",
            spec.axis.label(),
            fmt_f64(spec.values[i]),
            if failed { "fail" } else { "ok" },
            tr.steps,
            fmt_f64(tr.l2[last]),
            fmt_f64(tr.h1[last]),
            fmt_f64(max_sup),
            tame.details.get("measure").and_then(|v| v.as_f64()).map(fmt_f64).unwrap_or_default(),
            margin_of(&o.report, "energy"),
            margin_of(&o.report, "gradient_bound"),
            orders[i].map(fmt_f64).unwrap_or_default(),
        ));
    }
    let err = first_err.map(|i| {
        let e = results.into_iter().nth(i).expect("index in range").unwrap_err();
        let msg = e.to_string().replace([',', '\n'], ";");
        lines.push(format!("{i},{},{},error: {msg},,,,,,,,", spec.axis.label(), fmt_f64(spec.values[i])));
        e
    });
    let text = lines.join("\n") + "\n";
    write_atomic(&out.join("summary.csv"), |w| Ok(w.write_all(text.as_bytes())?))?;
    match err {
        Some(e) => Err(e),
        None if any_failed => Ok(EXIT_CHECK),
        None => Ok(EXIT_OK),
    }
}

/// Booleans that came out false in informational records.
fn info_warnings(report: &DiagnosticsReport) -> Vec<String> {
    report
        .records
        .iter()
        .filter(|r| r.status == Status::Info)
        .flat_map(|r| {
            r.details
                .iter()
                .filter(|(_, v)| v.as_bool() == Some(false))
                .map(move |(k, _)| format!("{}: {k} is false", r.name))
        })
        .collect()
}

/// Run the suite, print the table and optionally write `report.json`.
pub fn cmd_verify(cfg: &crate::suite::SuiteConfig, groups: Option<&[String]>, out: Option<&Path>) -> Result<i32> {
    let start = std::time::Instant::now();
    let report = run_suite(cfg, groups)?;
    print!("{}", report.to_table());
    for w in info_warnings(&report) {
        warn!("{w}");
        eprintln!("warning: {w}");
    }
    if let Some(dir) = out {
        write_report(&report, &dir.join("report.json"))?;
    }
    info!("verify finished in {:.1?}", start.elapsed());
    Ok(report_exit(&report))
}

/// Ensemble checks into `out/report.json` and snapshots into `out/attractor.csv`.
pub fn cmd_attractor(cfg: &RunConfig, out: &Path, jobs: usize) -> Result<i32> {
    let basis: Arc<StokesBasis> = StokesBasis::torus(cfg.torus)?;
    let e = &cfg.ensemble;
    let ens = integrate_ensemble(&e.spec, &basis, &cfg.taming, &cfg.solver, jobs)?;
    let mut report = run_metadata(cfg, DiagnosticsReport::new()).with_meta("ensemble_count", e.spec.count);
    report.push(check_absorbing(&ens, basis.lambda1(), e.eps))?;
    report.push(check_tail_compactness(&ens, e.tail_time, e.contraction)?)?;
    let sample = sample_attractor(&ens, e.burn_in, e.coords)?;
    sample.save_csv(&out.join("attractor.csv"))?;
    write_report(&report, &out.join("report.json"))?;
    print!("{}", report.to_table());
    Ok(report_exit(&report))
}
