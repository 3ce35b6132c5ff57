//! Pseudospectral nonlinear terms: `B(v, u) = -P((v . grad) u)`, the tamed
//! right-hand side, curl and the vorticity stretching term.
//!
//! Products are formed on the collocation grid. The retained mode set
//! satisfies `3 kmax < n`, so quadratic products carry no aliasing into the
//! retained modes and the result equals the Galerkin truncation of the exact
//! product.

use rustfft::num_complex::Complex64;

use crate::basis::TorusBasis;
use crate::error::Result;
use crate::fft::Fft3;
use crate::field::SpectralField;
use crate::norms::{norm, NormKind};
use crate::operators::apply_a;
use crate::taming::{taming_g, TamingParams};

/// Form of the advection term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdvectionForm {
    /// `(v . grad) u`.
    #[default]
    Convective,
    /// `((v . grad) u + div(v u^T)) / 2`; identical for divergence-free `v`
    /// up to round-off.
    Skew,
    /// No advection (linear Stokes flow plus taming).
    Off,
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn neg(m: [i32; 3]) -> [i32; 3] {
    [-m[0], -m[1], -m[2]]
}

/// Hermitian spectra of `d_j u_i` for all nine `(i, j)`, indexed `3 i + j`.
fn gradient_spectra(t: &TorusBasis, fft: &Fft3, coeffs: &[Complex64]) -> Vec<Vec<Complex64>> {
    let mut out = vec![vec![Complex64::default(); fft.len()]; 9];
    for (w, wv) in t.wavevectors().iter().enumerate() {
        let v = t.vector_coefficient(w, coeffs);
        let ip = fft.index_of(wv.m);
        let im = fft.index_of(neg(wv.m));
        for i in 0..3 {
            for j in 0..3 {
                let g = I * wv.k[j] * v[i];
                out[3 * i + j][ip] = g;
                out[3 * i + j][im] = g.conj();
            }
        }
    }
    out
}

/// Inverse transform a list of Hermitian spectra two at a time.
fn synthesize_all(t: &TorusBasis, fft: &Fft3, spectra: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(spectra.len());
    let mut iter = spectra.chunks(2);
    for pair in &mut iter {
        if pair.len() == 2 {
            let (a, b) = t.inverse_pair(fft, &pair[0], Some(&pair[1]));
            out.push(a);
            out.push(b);
        } else {
            out.push(t.inverse_pair(fft, &pair[0], None).0);
        }
    }
    out
}

fn velocity_grid(t: &TorusBasis, fft: &Fft3, coeffs: &[Complex64]) -> Vec<Vec<f64>> {
    let spec = t.spectra(coeffs, fft.size());
    synthesize_all(t, fft, &spec)
}

/// Grid samples of `(a . grad) b` given `a` on the grid and `grad b`.
fn advect(a: &[Vec<f64>], grad: &[Vec<f64>]) -> [Vec<f64>; 3] {
    let len = a[0].len();
    let comp = |i: usize| -> Vec<f64> {
        (0..len)
            .map(|x| a[0][x] * grad[3 * i][x] + a[1][x] * grad[3 * i + 1][x] + a[2][x] * grad[3 * i + 2][x])
            .collect()
    };
    [comp(0), comp(1), comp(2)]
}

fn project(t: &TorusBasis, fft: &Fft3, comps: [&[f64]; 3]) -> Vec<Complex64> {
    let spec = t.analyze(fft, comps);
    t.project_spectra(fft, &spec)
}

/// `B(v, u) = -P((v . grad) u)`, convective form.
pub fn bilinear_b(v: &SpectralField, u: &SpectralField) -> Result<SpectralField> {
    bilinear_b_with(v, u, AdvectionForm::Convective)
}

pub fn bilinear_b_with(v: &SpectralField, u: &SpectralField, form: AdvectionForm) -> Result<SpectralField> {
    v.ensure_compatible(u)?;
    let t = u.basis().torus_basis()?;
    if form == AdvectionForm::Off || v.is_zero() || u.is_zero() {
        return Ok(SpectralField::zeros(u.basis()));
    }
    let fft = t.grid();
    let vg = velocity_grid(t, fft, v.coeffs());
    let grad = synthesize_all(t, fft, &gradient_spectra(t, fft, u.coeffs()));
    let [px, py, pz] = advect(&vg, &grad);
    let mut conv = project(t, fft, [&px, &py, &pz]);
    if form == AdvectionForm::Skew {
        // div(v u^T)_i = sum_j d_j (v_j u_i), evaluated spectrally
        let ug = velocity_grid(t, fft, u.coeffs());
        let len = fft.len();
        let products: Vec<Vec<f64>> = (0..9)
            .map(|ij| {
                let (i, j) = (ij / 3, ij % 3);
                (0..len).map(|x| vg[j][x] * ug[i][x]).collect()
            })
            .collect();
        let mut spec: Vec<Vec<Complex64>> = Vec::with_capacity(9);
        for chunk in products.chunks(3) {
            let s = t.analyze(fft, [&chunk[0], &chunk[1], &chunk[2]]);
            spec.extend(s);
        }
        let mut div = [vec![Complex64::default(); len], vec![Complex64::default(); len], vec![
            Complex64::default();
            len
        ]];
        for wv in t.wavevectors() {
            for m in [wv.m, neg(wv.m)] {
                let idx = fft.index_of(m);
                let sign = if m == wv.m { 1.0 } else { -1.0 };
                for (i, d) in div.iter_mut().enumerate() {
                    d[idx] = (0..3).map(|j| I * (sign * wv.k[j]) * spec[3 * i + j][idx]).sum();
                }
            }
        }
        let divc = t.project_spectra(fft, &div);
        for (c, d) in conv.iter_mut().zip(divc) {
            *c = (*c + d) * 0.5;
        }
    }
    for c in conv.iter_mut() {
        *c = -*c;
    }
    SpectralField::from_coeffs(u.basis(), conv)
}

/// Vorticity `curl u = i k x u_hat`; automatically solenoidal.
pub fn curl(u: &SpectralField) -> Result<SpectralField> {
    let t = u.basis().torus_basis()?;
    let mut out = vec![Complex64::default(); u.len()];
    for (w, wv) in t.wavevectors().iter().enumerate() {
        let v = t.vector_coefficient(w, u.coeffs());
        let k = wv.k;
        let c = [
            I * (v[2] * k[1] - v[1] * k[2]),
            I * (v[0] * k[2] - v[2] * k[0]),
            I * (v[1] * k[0] - v[0] * k[1]),
        ];
        let p = t.project_vector(w, c);
        out[2 * w] = p[0];
        out[2 * w + 1] = p[1];
    }
    SpectralField::from_coeffs(u.basis(), out)
}

/// `(omega . grad) u - (u . grad) omega` with `omega = curl u`, Galerkin-truncated.
pub fn vortex_stretching(u: &SpectralField) -> Result<SpectralField> {
    let t = u.basis().torus_basis()?;
    if u.is_zero() {
        return Ok(SpectralField::zeros(u.basis()));
    }
    let omega = curl(u)?;
    let fft = t.grid();
    let ug = velocity_grid(t, fft, u.coeffs());
    let wg = velocity_grid(t, fft, omega.coeffs());
    let gu = synthesize_all(t, fft, &gradient_spectra(t, fft, u.coeffs()));
    let gw = synthesize_all(t, fft, &gradient_spectra(t, fft, omega.coeffs()));
    let a = advect(&wg, &gu);
    let b = advect(&ug, &gw);
    let diff: Vec<Vec<f64>> =
        (0..3).map(|i| a[i].iter().zip(&b[i]).map(|(x, y)| x - y).collect()).collect();
    SpectralField::from_coeffs(u.basis(), project(t, fft, [&diff[0], &diff[1], &diff[2]]))
}

/// `||u - U||_inf^2` including the constant parts of both fields.
pub fn taming_argument(u: &SpectralField, mean_flow: [f64; 3], p: &TamingParams) -> Result<f64> {
    let diff = match &p.reference {
        Some(r) => u - r,
        None => u.clone(),
    };
    let c = [
        mean_flow[0] - p.reference_offset[0],
        mean_flow[1] - p.reference_offset[1],
        mean_flow[2] - p.reference_offset[2],
    ];
    if c == [0.0; 3] {
        return Ok(norm(&diff, NormKind::Sup)?.powi(2));
    }
    if diff.basis().torus_basis().is_err() {
        return Ok(c.iter().map(|x| x * x).sum());
    }
    let g = diff.fine_samples()?;
    Ok((0..g.comps[0].len())
        .map(|i| (0..3).map(|d| (g.comps[d][i] + c[d]).powi(2)).sum::<f64>())
        .fold(0.0, f64::max))
}

/// `u - U` restricted to the mean-zero coefficients.
pub fn deviation(u: &SpectralField, p: &TamingParams) -> SpectralField {
    match &p.reference {
        Some(r) => u - r,
        None => u.clone(),
    }
}

/// The addends of `-nu A u + B(u, u) - g(||u - U||_inf^2)(u - U)`.
#[derive(Debug, Clone)]
pub struct RhsBreakdown {
    pub stokes_part: SpectralField,
    pub advection_part: SpectralField,
    pub taming_part: SpectralField,
    pub g_value: f64,
    pub sup_sq: f64,
}

impl RhsBreakdown {
    pub fn total(&self) -> SpectralField {
        &(&self.stokes_part + &self.advection_part) + &self.taming_part
    }
}

pub fn tamed_rhs(u: &SpectralField, p: &TamingParams) -> Result<RhsBreakdown> {
    tamed_rhs_with(u, p, AdvectionForm::Convective)
}

pub fn tamed_rhs_with(u: &SpectralField, p: &TamingParams, form: AdvectionForm) -> Result<RhsBreakdown> {
    if let Some(r) = &p.reference {
        u.ensure_compatible(r)?;
    }
    let stokes_part = apply_a(u).scale(-p.nu);
    let advection_part = bilinear_b_with(u, u, form)?;
    let sup_sq = taming_argument(u, [0.0; 3], p)?;
    let g_value = taming_g(sup_sq, p);
    let taming_part = if g_value > 0.0 {
        deviation(u, p).scale(-g_value)
    } else {
        SpectralField::zeros(u.basis())
    };
    Ok(RhsBreakdown { stokes_part, advection_part, taming_part, g_value, sup_sq })
}
