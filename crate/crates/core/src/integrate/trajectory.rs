//! Time-stamped states and per-step observables.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::field::SpectralField;
use crate::io::{fmt_f64, write_atomic};
use crate::norms::weighted_sq;

/// A computed trajectory.
///
/// Observables are sampled every `cadence` steps (and always at the final
/// time). The dissipation integrals `int ||grad u||^2` and `int ||A u||^2`
/// are accumulated with the composite trapezoid rule over every step, and
/// `quad_err_*` carry an asymptotic estimate of that quadrature error built
/// from second differences of the integrand.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Recorded states; empty when states were not kept.
    pub states: Vec<SpectralField>,
    /// State at the final time, kept even when `states` is empty.
    pub last_state: Option<SpectralField>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    /// `||A u||_{L2}`.
    pub h2: Vec<f64>,
    pub sup: Vec<f64>,
    pub g_value: Vec<f64>,
    pub cum_diss_h1: Vec<f64>,
    pub cum_diss_h2: Vec<f64>,
    pub quad_err_h1: Vec<f64>,
    pub quad_err_h2: Vec<f64>,
    pub nu: f64,
    /// Total number of time steps taken.
    pub steps: usize,
    /// Picard iterations used, when produced by the Picard scheme.
    pub iterations: Option<usize>,
}

pub const CSV_HEADER: &str = "time,l2,h1,h2_proxy,sup,g_value,cum_diss_h1,cum_diss_h2";

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&SpectralField> {
        self.states.last().or(self.last_state.as_ref())
    }

    pub fn initial_state(&self) -> Option<&SpectralField> {
        self.states.first()
    }

    /// Final time.
    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for i in 0..self.len() {
            let row = [
                self.times[i],
                self.l2[i],
                self.h1[i],
                self.h2[i],
                self.sup[i],
                self.g_value[i],
                self.cum_diss_h1[i],
                self.cum_diss_h2[i],
            ];
            let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_csv(w))
    }

    /// Internal consistency: strictly increasing times and equal-length columns.
    pub fn is_well_formed(&self) -> bool {
        let n = self.times.len();
        self.times.windows(2).all(|w| w[1] > w[0])
            && [&self.l2, &self.h1, &self.h2, &self.sup, &self.g_value, &self.cum_diss_h1, &self.cum_diss_h2]
                .iter()
                .all(|c| c.len() == n)
            && (self.states.is_empty() || self.states.len() == n)
    }
}

/// Accumulates a trajectory step by step.
#[derive(Debug)]
pub(crate) struct Recorder {
    traj: Trajectory,
    cadence: usize,
    keep_states: bool,
    // per-step time, ||grad u||^2 and ||A u||^2
    t: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    recorded: Vec<usize>,
    pending: Option<(SpectralField, f64, f64)>,
}

impl Recorder {
    pub fn new(nu: f64, cadence: usize, keep_states: bool) -> Self {
        Self {
            traj: Trajectory { nu, ..Default::default() },
            cadence: cadence.max(1),
            keep_states,
            t: Vec::new(),
            f1: Vec::new(),
            f2: Vec::new(),
            recorded: Vec::new(),
            pending: None,
        }
    }

    /// Register the state at time `t` (one call per step). `sup` is
    /// `||u||_sup` and `g` the taming coefficient at this state.
    pub fn push(&mut self, t: f64, u: &SpectralField, sup: f64, g: f64) {
        let step = self.t.len();
        self.t.push(t);
        self.f1.push(weighted_sq(u, 1));
        self.f2.push(weighted_sq(u, 2));
        if step.is_multiple_of(self.cadence) {
            self.record(u, sup, g);
            self.pending = None;
            if !self.keep_states {
                self.traj.last_state = Some(u.clone());
            }
        } else {
            self.pending = Some((u.clone(), sup, g));
        }
    }

    fn record(&mut self, u: &SpectralField, sup: f64, g: f64) {
        let tr = &mut self.traj;
        self.recorded.push(self.t.len() - 1);
        tr.times.push(*self.t.last().expect("pushed before recording"));
        tr.l2.push(weighted_sq(u, 0).sqrt());
        tr.h1.push(self.f1.last().expect("pushed").sqrt());
        tr.h2.push(self.f2.last().expect("pushed").sqrt());
        tr.sup.push(sup);
        tr.g_value.push(g);
        if self.keep_states {
            tr.states.push(u.clone());
        }
    }

    pub fn finish(mut self) -> Trajectory {
        if let Some((u, sup, g)) = self.pending.take() {
            self.record(&u, sup, g);
            self.traj.last_state = Some(u);
        }
        let (c1, e1) = trapezoid(&self.t, &self.f1);
        let (c2, e2) = trapezoid(&self.t, &self.f2);
        let tr = &mut self.traj;
        for &i in &self.recorded {
            tr.cum_diss_h1.push(c1[i]);
            tr.cum_diss_h2.push(c2[i]);
            tr.quad_err_h1.push(e1[i]);
            tr.quad_err_h2.push(e2[i]);
        }
        tr.steps = self.t.len().saturating_sub(1);
        self.traj
    }
}

/// Composite trapezoid integral of `f` over `t` and the running asymptotic
/// error estimate `sum h^3 |f''| / 12`.
pub(crate) fn trapezoid(t: &[f64], f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut cum = vec![0.0; t.len()];
    let mut err = vec![0.0; t.len()];
    for m in 1..t.len() {
        let h = t[m] - t[m - 1];
        cum[m] = cum[m - 1] + 0.5 * h * (f[m] + f[m - 1]);
        let d2 = if t.len() < 3 {
            0.0
        } else {
            let c = m.clamp(1, t.len() - 2);
            let (h1, h2) = (t[c] - t[c - 1], t[c + 1] - t[c]);
            (2.0 * ((f[c + 1] - f[c]) / h2 - (f[c] - f[c - 1]) / h1) / (h1 + h2)).abs()
        };
        err[m] = err[m - 1] + h.powi(3) / 12.0 * d2;
    }
    (cum, err)
}
