//! FFT-free reference path for cross-validation at tiny resolution.
//!
//! [`dense_b`] evaluates `-P((v.grad) u)` as a direct convolution sum over
//! wavevector pairs with the per-mode Leray projector, and
//! [`reference_integrate`] advances the mode ODEs with an adaptive
//! Dormand-Prince 5(4) pair, evaluating sup norms by direct summation of the
//! Fourier series. None of this shares code with the pseudospectral path.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::basis::{StokesBasis, TorusBasis};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::integrate::Trajectory;
use crate::norms::weighted_sq;
use crate::taming::{taming_g, TamingParams};

/// Largest grid resolution the oracle accepts.
pub const RESOLUTION_CAP: usize = 12;

/// Which wavevectors take part in the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    /// Inputs and output restricted to `|m_i| <= ceil(2n/3 / 2) - 1`, the set
    /// retained by the pseudospectral solver under the 2/3 rule.
    #[default]
    Dealiased,
    /// Every mode of the basis, with exact (alias-free) products.
    Full,
}

fn torus_checked(basis: &Arc<StokesBasis>) -> Result<&TorusBasis> {
    let t = basis.torus_basis()?;
    let n = t.params().n;
    if n > RESOLUTION_CAP {
        return Err(Error::ResolutionCap { n, cap: RESOLUTION_CAP });
    }
    Ok(t)
}

fn dealiased_kmax(n: usize) -> i32 {
    (2 * n).div_ceil(6) as i32 - 1
}

// full Fourier coefficients hat u(m) for all +-m in the retained set
fn fourier_table(t: &TorusBasis, c: &[Complex64], kcut: i32) -> Vec<([i32; 3], [f64; 3], [Complex64; 3])> {
    let s = 1.0 / (2.0f64.sqrt() * t.params().length.powf(1.5));
    let mut out = Vec::with_capacity(2 * t.wavevectors().len());
    for (w, wv) in t.wavevectors().iter().enumerate() {
        if wv.m.iter().any(|x| x.abs() > kcut) {
            continue;
        }
        let (a, b) = (c[2 * w], c[2 * w + 1]);
        let mut h = [Complex64::new(0.0, 0.0); 3];
        for (d, hd) in h.iter_mut().enumerate() {
            *hd = (a * wv.pol[0][d] + b * wv.pol[1][d]) * s;
        }
        out.push((wv.m, wv.k, h));
        let conj = [h[0].conj(), h[1].conj(), h[2].conj()];
        out.push(([-wv.m[0], -wv.m[1], -wv.m[2]], [-wv.k[0], -wv.k[1], -wv.k[2]], conj));
    }
    out
}

/// `-P((v.grad) u)` by direct convolution in coefficient space.
pub fn dense_b(v: &SpectralField, u: &SpectralField) -> Result<SpectralField> {
    dense_b_with(v, u, Truncation::default())
}

pub fn dense_b_with(v: &SpectralField, u: &SpectralField, trunc: Truncation) -> Result<SpectralField> {
    v.ensure_compatible(u)?;
    let t = torus_checked(u.basis())?;
    let kcut = match trunc {
        Truncation::Dealiased => dealiased_kmax(t.params().n),
        Truncation::Full => i32::MAX,
    };
    let vt = fourier_table(t, v.coeffs(), kcut);
    let ut = fourier_table(t, u.coeffs(), kcut);
    let index: HashMap<[i32; 3], usize> = t.wavevectors().iter().enumerate().map(|(i, w)| (w.m, i)).collect();
    let mut acc = vec![[Complex64::new(0.0, 0.0); 3]; t.wavevectors().len()];
    let i = Complex64::new(0.0, 1.0);
    for (mp, _, vh) in &vt {
        for (mq, kq, uh) in &ut {
            let m = [mp[0] + mq[0], mp[1] + mq[1], mp[2] + mq[2]];
            let Some(&w) = index.get(&m) else { continue };
            if m.iter().any(|x| x.abs() > kcut) {
                continue;
            }
            // (v.grad) u at wavevector p + q: (hat v(p) . i q) hat u(q)
            let a = (vh[0] * kq[0] + vh[1] * kq[1] + vh[2] * kq[2]) * i;
            for d in 0..3 {
                acc[w][d] += a * uh[d];
            }
        }
    }
    let s = 1.0 / (2.0f64.sqrt() * t.params().length.powf(1.5));
    let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
    for (w, wv) in t.wavevectors().iter().enumerate() {
        let k2 = wv.lambda;
        let f = acc[w];
        let kf = (f[0] * wv.k[0] + f[1] * wv.k[1] + f[2] * wv.k[2]) / k2;
        let proj: Vec<Complex64> = (0..3).map(|d| -(f[d] - kf * wv.k[d])).collect();
        for p in 0..2 {
            let e = wv.pol[p];
            out[2 * w + p] = (proj[0] * e[0] + proj[1] * e[1] + proj[2] * e[2]) / s;
        }
    }
    SpectralField::from_coeffs(u.basis(), out)
}

/// Sup of `|u(x)|` over the oversampled grid by direct summation.
pub fn direct_sup(u: &SpectralField) -> Result<f64> {
    let t = torus_checked(u.basis())?;
    let m = t.params().n * t.params().oversample;
    let l = t.params().length;
    let s = 2.0f64.sqrt() / l.powf(1.5);
    let kmax = t.kmax();
    // 1-D tables e^{i 2 pi j m / M}
    let width = (2 * kmax + 1) as usize;
    let table: Vec<Complex64> = (0..m)
        .flat_map(|j| {
            (-kmax..=kmax).map(move |q| Complex64::from_polar(1.0, 2.0 * PI * (j as f64) * q as f64 / m as f64))
        })
        .collect();
    let e = |j: usize, q: i32| table[j * width + (q + kmax) as usize];
    let c = u.coeffs();
    let vecs: Vec<[Complex64; 3]> = t
        .wavevectors()
        .iter()
        .enumerate()
        .map(|(w, wv)| {
            let mut h = [Complex64::new(0.0, 0.0); 3];
            for (d, hd) in h.iter_mut().enumerate() {
                *hd = c[2 * w] * wv.pol[0][d] + c[2 * w + 1] * wv.pol[1][d];
            }
            h
        })
        .collect();
    let mut best = 0.0f64;
    for jx in 0..m {
        for jy in 0..m {
            for jz in 0..m {
                let mut val = [0.0; 3];
                for (wv, h) in t.wavevectors().iter().zip(&vecs) {
                    let ph = e(jx, wv.m[0]) * e(jy, wv.m[1]) * e(jz, wv.m[2]);
                    for d in 0..3 {
                        val[d] += (h[d] * ph).re;
                    }
                }
                best = best.max((val[0] * val[0] + val[1] * val[1] + val[2] * val[2]).sqrt() * s);
            }
        }
    }
    Ok(best)
}

// Dormand-Prince 5(4) tableau; the system is autonomous so the nodes are not needed
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Ode<'a> {
    basis: &'a Arc<StokesBasis>,
    p: &'a TamingParams,
}

impl Ode<'_> {
    fn field(&self, y: &[Complex64]) -> SpectralField {
        SpectralField::from_coeffs(self.basis, y.to_vec()).expect("length fixed by the basis")
    }

    // returns (dy/dt, sup of u - U, g)
    fn rhs(&self, y: &[Complex64]) -> Result<(Vec<Complex64>, f64, f64)> {
        let u = self.field(y);
        let dev = match &self.p.reference {
            Some(r) => &u - r,
            None => u.clone(),
        };
        let sup = direct_sup(&dev)?;
        let g = taming_g(sup * sup, self.p);
        let b = dense_b(&u, &u)?;
        let lam = self.basis.eigenvalues();
        let out = (0..y.len())
            .map(|j| -self.p.nu * lam[j] * y[j] + b.coeffs()[j] - g * dev.coeffs()[j])
            .collect();
        Ok((out, sup, g))
    }
}

fn combine(y: &[Complex64], h: f64, k: &[Vec<Complex64>], w: &[f64]) -> Vec<Complex64> {
    let mut out = y.to_vec();
    for (ks, &ws) in k.iter().zip(w) {
        if ws == 0.0 {
            continue;
        }
        for (o, kv) in out.iter_mut().zip(ks) {
            *o += kv * (h * ws);
        }
    }
    out
}

/// Adaptive Dormand-Prince integration up to `t_final`; every accepted step
/// is recorded.
pub fn reference_integrate(u0: &SpectralField, p: &TamingParams, t_final: f64, rtol: f64) -> Result<Trajectory> {
    reference_integrate_impl(u0, p, &[t_final], rtol, true)
}

/// Adaptive Dormand-Prince integration recording exactly at `times`
/// (ascending, starting at 0).
pub fn reference_integrate_at(u0: &SpectralField, p: &TamingParams, times: &[f64], rtol: f64) -> Result<Trajectory> {
    if times.first() != Some(&0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("observation times must start at 0 and increase strictly".into()));
    }
    reference_integrate_impl(u0, p, &times[1..], rtol, false)
}

fn reference_integrate_impl(
    u0: &SpectralField,
    p: &TamingParams,
    stops: &[f64],
    rtol: f64,
    record_all: bool,
) -> Result<Trajectory> {
    if !(rtol >= 1e-12) {
        return Err(Error::Domain(format!("rtol must be at least 1e-12, got {rtol}")));
    }
    if p.reference_offset != [0.0; 3] {
        return Err(Error::Config("the oracle does not carry a constant reference offset".into()));
    }
    p.validate()?;
    torus_checked(u0.basis())?;
    let ode = Ode { basis: u0.basis(), p };
    let scale0 = u0.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let atol = rtol * scale0.max(f64::MIN_POSITIVE);

    let mut times = vec![0.0];
    let mut states = vec![u0.clone()];
    let mut sups = Vec::new();
    let mut gs = Vec::new();
    let mut y = u0.coeffs().to_vec();
    let (mut k0, sup0, g0) = ode.rhs(&y)?;
    sups.push(sup0);
    gs.push(g0);
    let t_final = *stops.last().unwrap_or(&0.0);
    let mut t = 0.0;
    let mut h = (t_final / 100.0).min(1e-2).max(1e-8);
    let mut next_stop = 0;
    while next_stop < stops.len() {
        let target = stops[next_stop];
        let step = h.min(target - t);
        let landing = step >= target - t;
        if step < 1e-14 * t_final.max(1.0) {
            return Err(Error::Stiffness { time: t });
        }
        let mut k = vec![k0.clone()];
        for s in 1..7 {
            let ys = combine(&y, step, &k, &A[s][..s]);
            k.push(ode.rhs(&ys)?.0);
        }
        let y5 = combine(&y, step, &k, &B5);
        let y4 = combine(&y, step, &k, &B4);
        let err = (y5
            .iter()
            .zip(&y4)
            .zip(&y)
            .map(|((a, b), c)| {
                let sc = atol + rtol * a.norm().max(c.norm());
                ((a - b).norm() / sc).powi(2)
            })
            .sum::<f64>()
            / y.len() as f64)
            .sqrt();
        if !err.is_finite() {
            return Err(Error::BlowUp { last_finite_time: t, reason: "oracle state is not finite".into() });
        }
        if err <= 1.0 {
            t = if landing { target } else { t + step };
            y = y5;
            let (kn, sup, g) = ode.rhs(&y)?;
            k0 = kn;
            if landing {
                next_stop += 1;
            }
            if landing || record_all {
                times.push(t);
                states.push(ode.field(&y));
                sups.push(sup);
                gs.push(g);
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 || !landing {
            h = step * factor;
        } else {
            h = step * factor.min(1.0);
        }
    }
    Ok(assemble(times, states, sups, gs, p.nu))
}

fn assemble(times: Vec<f64>, states: Vec<SpectralField>, sup: Vec<f64>, g: Vec<f64>, nu: f64) -> Trajectory {
    let f1: Vec<f64> = states.iter().map(|u| weighted_sq(u, 1)).collect();
    let f2: Vec<f64> = states.iter().map(|u| weighted_sq(u, 2)).collect();
    let mut cum1 = vec![0.0; times.len()];
    let mut cum2 = vec![0.0; times.len()];
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        cum1[i] = cum1[i - 1] + 0.5 * h * (f1[i] + f1[i - 1]);
        cum2[i] = cum2[i - 1] + 0.5 * h * (f2[i] + f2[i - 1]);
    }
    Trajectory {
        l2: states.iter().map(|u| weighted_sq(u, 0).sqrt()).collect(),
        h1: f1.iter().map(|x| x.sqrt()).collect(),
        h2: f2.iter().map(|x| x.sqrt()).collect(),
        steps: times.len().saturating_sub(1),
        quad_err_h1: vec![0.0; times.len()],
        quad_err_h2: vec![0.0; times.len()],
        cum_diss_h1: cum1,
        cum_diss_h2: cum2,
        sup,
        g_value: g,
        times,
        states,
        nu,
        iterations: None,
        last_state: None,
    }
}
