//! Flat `key = value` configuration files.
//!
//! Keys are dotted (`taming.nu`); a `[section]` line prefixes the keys that
//! follow it. `#` starts a comment. Lists are comma separated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::attractor::EnsembleSpec;
use crate::basis::TorusParams;
use crate::error::{Error, Result};
use crate::integrate::{DtControl, SolverConfig, StepMode};
use crate::nonlinear::AdvectionForm;
use crate::presets::InitialCondition;
use crate::suite::{Fault, SuiteConfig};
use crate::taming::TamingParams;

const KNOWN: &[&str] = &[
    "seed",
    "basis.n",
    "basis.length",
    "basis.dealias",
    "basis.oversample",
    "taming.nu",
    "taming.kappa",
    "taming.threshold",
    "taming.reference_offset",
    "solver.dt",
    "solver.horizon",
    "solver.mode",
    "solver.cadence",
    "solver.cfl",
    "solver.advection",
    "solver.mean_flow",
    "solver.picard_tol",
    "solver.picard_max_iter",
    "solver.picard_window",
    "solver.blowup_factor",
    "initial.kind",
    "initial.wavevector",
    "initial.polarization",
    "initial.amplitude",
    "initial.slope",
    "initial.h1",
    "initial.path",
    "output.dir",
    "checks",
    "sweep.axis",
    "sweep.values",
    "ensemble.count",
    "ensemble.radius",
    "ensemble.slope",
    "ensemble.times",
    "ensemble.n_list",
    "ensemble.eps",
    "ensemble.contraction",
    "ensemble.tail_time",
    "ensemble.burn_in",
    "ensemble.coords",
    "verify.n",
    "verify.inject_fault",
];

/// Parsed key/value pairs with the line each came from.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub origin: String,
    /// Directory that relative paths are resolved against.
    pub base: PathBuf,
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str, base: &Path) -> Result<Self> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("{origin}:{line_no}: unterminated section header")))?
                    .trim();
                section = if name.is_empty() { String::new() } else { format!("{name}.") };
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{origin}:{line_no}: expected 'key = value', got '{line}'")))?;
            let key = format!("{section}{}", k.trim());
            let value = v.trim();
            if !KNOWN.contains(&key.as_str()) {
                return Err(Error::Config(format!("{origin}:{line_no}: unknown key '{key}'")));
            }
            if value.is_empty() {
                return Err(Error::Config(format!("{origin}:{line_no}: key '{key}' has no value")));
            }
            if let Some((_, prev)) = entries.get(&key) {
                return Err(Error::Config(format!("{origin}:{line_no}: key '{key}' already set on line {prev}")));
            }
            entries.insert(key, (value.to_string(), line_no));
        }
        Ok(ConfigFile { origin: origin.to_string(), base: base.to_path_buf(), entries })
    }

    pub fn empty(origin: &str) -> Self {
        ConfigFile { origin: origin.to_string(), ..Default::default() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn err(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        match self.entries.get(key) {
            Some((_, line)) => Error::Config(format!("{}:{line}: {key}: {msg}", self.origin)),
            None => Error::Config(format!("{}: {key}: {msg}", self.origin)),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| self.err(key, format!("cannot parse '{v}': {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::Config(format!("{}: missing required key '{key}'", self.origin)))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| self.err(key, format!("cannot parse '{s}': {e}"))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn vec3(&self, key: &str) -> Result<Option<[f64; 3]>> {
        match self.list::<f64>(key)? {
            None => Ok(None),
            Some(v) if v.len() == 3 => Ok(Some([v[0], v[1], v[2]])),
            Some(v) => Err(self.err(key, format!("expected 3 components, got {}", v.len()))),
        }
    }

    fn wrap<T>(&self, key: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            Error::Config(m) | Error::Domain(m) => self.err(key, m),
            other => other,
        })
    }
}

/// Axis of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Threshold,
    Kappa,
    Nu,
    Dt,
    N,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "threshold" => Ok(SweepAxis::Threshold),
            "kappa" => Ok(SweepAxis::Kappa),
            "nu" => Ok(SweepAxis::Nu),
            "dt" => Ok(SweepAxis::Dt),
            "n" => Ok(SweepAxis::N),
            other => Err(Error::Config(format!("unknown sweep axis '{other}' (expected N, kappa, nu, dt or n)"))),
        }
    }
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Threshold => "N",
            SweepAxis::Kappa => "kappa",
            SweepAxis::Nu => "nu",
            SweepAxis::Dt => "dt",
            SweepAxis::N => "n",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSettings {
    pub spec: EnsembleSpec,
    pub eps: f64,
    pub contraction: f64,
    pub tail_time: f64,
    pub burn_in: f64,
    pub coords: usize,
}

pub const RUN_CHECKS: &[&str] = &["energy", "gradient", "decay", "tame_time", "sup_ratio", "vorticity", "lq_moment"];

/// Everything `run`, `sweep` and `attractor` need.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub torus: TorusParams,
    pub taming: TamingParams,
    pub solver: SolverConfig,
    pub initial: InitialCondition,
    pub out_dir: PathBuf,
    pub checks: Vec<String>,
    pub sweep: Option<SweepSpec>,
    pub ensemble: EnsembleSettings,
}

fn parse_advection(s: &str) -> Result<AdvectionForm> {
    match s {
        "convective" => Ok(AdvectionForm::Convective),
        "skew" => Ok(AdvectionForm::Skew),
        "off" => Ok(AdvectionForm::Off),
        other => Err(Error::Config(format!("unknown advection form '{other}' (expected convective, skew or off)"))),
    }
}

fn taming_from(f: &ConfigFile, nu: f64) -> Result<TamingParams> {
    let kappa = f.get_or("taming.kappa", 1.0)?;
    let threshold = f.get_or("taming.threshold", 1.0)?;
    let p = if threshold == f64::INFINITY {
        f.wrap("taming.nu", TamingParams::untamed(nu))?
    } else {
        f.wrap("taming.threshold", TamingParams::new(nu, kappa, threshold))?
    };
    Ok(match f.vec3("taming.reference_offset")? {
        Some(v) => p.with_reference_offset(v),
        None => p,
    })
}

impl RunConfig {
    pub fn from_file(f: &ConfigFile) -> Result<Self> {
        let seed = f.get_or("seed", 0u64)?;
        let n: usize = f.require("basis.n")?;
        let mut torus = TorusParams::new(n);
        torus.length = f.get_or("basis.length", torus.length)?;
        torus.dealias = f.get_or("basis.dealias", torus.dealias)?;
        torus.oversample = f.get_or("basis.oversample", torus.oversample)?;

        let nu: f64 = f.require("taming.nu")?;
        let taming = taming_from(f, nu)?;

        let mut solver = SolverConfig::new(f.require("solver.dt")?, f.require("solver.horizon")?, StepMode::Etd2);
        if let Some(m) = f.raw("solver.mode") {
            solver.mode = f.wrap("solver.mode", m.parse())?;
        }
        solver.cadence = f.get_or("solver.cadence", solver.cadence)?;
        if let Some(c) = f.get::<f64>("solver.cfl")? {
            solver.dt_control = DtControl::Cfl(c);
        }
        if let Some(a) = f.raw("solver.advection") {
            solver.advection = f.wrap("solver.advection", parse_advection(a))?;
        }
        solver.mean_flow = f.vec3("solver.mean_flow")?.unwrap_or([0.0; 3]);
        solver.picard_tol = f.get_or("solver.picard_tol", solver.picard_tol)?;
        solver.picard_max_iter = f.get_or("solver.picard_max_iter", solver.picard_max_iter)?;
        solver.picard_window = f.get("solver.picard_window")?;
        solver.blowup_factor = f.get_or("solver.blowup_factor", solver.blowup_factor)?;
        solver.keep_states = false;
        f.wrap("solver.dt", solver.validate())?;

        let kind: String = f.require("initial.kind")?;
        let initial = match kind.as_str() {
            "zero" => InitialCondition::Zero,
            "single-mode" => {
                let w = f.list::<i32>("initial.wavevector")?.unwrap_or_else(|| vec![1, 0, 0]);
                if w.len() != 3 {
                    return Err(f.err("initial.wavevector", "expected 3 integers"));
                }
                InitialCondition::SingleMode {
                    wavevector: [w[0], w[1], w[2]],
                    polarization: f.get_or("initial.polarization", 0u8)?,
                    amplitude: f.get_or("initial.amplitude", 1.0)?,
                }
            }
            "taylor-green" => InitialCondition::TaylorGreen { amplitude: f.get_or("initial.amplitude", 1.0)? },
            "random" => InitialCondition::Random {
                seed,
                slope: f.get_or("initial.slope", 1.0)?,
                h1: f.require("initial.h1")?,
            },
            "checkpoint" => {
                let rel: String = f.require("initial.path")?;
                let path = f.base.join(rel);
                if !path.is_file() {
                    return Err(f.err("initial.path", format!("no such file {}", path.display())));
                }
                InitialCondition::Checkpoint(path)
            }
            other => {
                return Err(f.err(
                    "initial.kind",
                    format!("unknown preset '{other}' (expected zero, single-mode, taylor-green, random or checkpoint)"),
                ))
            }
        };

        let checks: Vec<String> = f.list("checks")?.unwrap_or_else(|| vec!["energy".into(), "gradient".into()]);
        validate_checks(&checks).map_err(|m| f.err("checks", m))?;

        let sweep = match (f.raw("sweep.axis"), f.list::<f64>("sweep.values")?) {
            (Some(a), Some(values)) => Some(SweepSpec { axis: f.wrap("sweep.axis", a.parse())?, values }),
            (None, None) => None,
            (Some(_), None) => return Err(Error::Config(format!("{}: missing required key 'sweep.values'", f.origin))),
            (None, Some(_)) => return Err(Error::Config(format!("{}: missing required key 'sweep.axis'", f.origin))),
        };

        let mut spec = EnsembleSpec::new(f.get_or("ensemble.count", 8)?, seed, f.get_or("ensemble.radius", 5.0)?);
        spec.slope = f.get_or("ensemble.slope", spec.slope)?;
        if let Some(t) = f.list("ensemble.times")? {
            spec.times = t;
        }
        if let Some(l) = f.list("ensemble.n_list")? {
            spec.n_list = l;
        }
        f.wrap("ensemble.count", spec.validate())?;
        let tail_time = f.get_or("ensemble.tail_time", spec.times.last().copied().unwrap_or(1.0))?;
        if !spec.times.contains(&tail_time) {
            return Err(f.err("ensemble.tail_time", "must be one of ensemble.times"));
        }
        let ensemble = EnsembleSettings {
            spec,
            eps: f.get_or("ensemble.eps", 0.01)?,
            contraction: f.get_or("ensemble.contraction", 0.1)?,
            tail_time,
            burn_in: f.get_or("ensemble.burn_in", 0.0)?,
            coords: f.get_or("ensemble.coords", 8)?,
        };

        Ok(RunConfig {
            seed,
            torus,
            taming,
            solver,
            initial,
            out_dir: PathBuf::from(f.get_or("output.dir", "out".to_string())?),
            checks,
            sweep,
            ensemble,
        })
    }

    /// Replace every seed with `seed`.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.ensemble.spec.seed = seed;
        if let InitialCondition::Random { seed: s, .. } = &mut self.initial {
            *s = seed;
        }
    }
}

pub fn validate_checks(checks: &[String]) -> std::result::Result<(), String> {
    match checks.iter().find(|c| !RUN_CHECKS.contains(&c.as_str())) {
        Some(bad) => Err(format!("unknown check '{bad}' (known: {})", RUN_CHECKS.join(", "))),
        None => Ok(()),
    }
}

/// Suite settings; every key is optional.
pub fn suite_from_file(f: &ConfigFile) -> Result<SuiteConfig> {
    let d = SuiteConfig::default();
    let nu = f.get_or("taming.nu", d.nu)?;
    let p = taming_from(f, nu)?;
    if !p.is_tamed() {
        return Err(f.err("taming.threshold", "the suite needs a finite threshold"));
    }
    let fault = match f.raw("verify.inject_fault") {
        Some(s) => Some(f.wrap("verify.inject_fault", s.parse::<Fault>())?),
        None => None,
    };
    Ok(SuiteConfig {
        nu,
        kappa: p.kappa,
        threshold: p.threshold,
        n: f.get_or("verify.n", d.n)?,
        seed: f.get_or("seed", d.seed)?,
        jobs: 1,
        fault,
    })
}
