//! Spectral realizations of the Stokes operator.
//!
//! Two realizations are provided. The periodic torus `[0, L)^3` restricted to
//! mean-zero divergence-free fields, where each retained wavevector carries two
//! polarizations orthogonal to it, and a manufactured realization backed by a
//! dense symmetric positive matrix with a prescribed spectrum.
//!
//! Torus modes are indexed by a canonical wavevector `m` (first nonzero
//! component positive) and a polarization `p in {0, 1}`. A field with mode
//! coefficients `c` is the real vector field
//!
//! ```text
//! u(x) = L^{-3/2} sum_{(m,p)} sqrt(2) Re(c_{m,p} exp(i k.x)) e_p(m),   k = 2 pi m / L
//! ```
//!
//! so that `||u||_{L2}^2 = sum |c|^2`. Modes are ordered by ascending
//! eigenvalue `|k|^2`, ties broken by lexicographic wavevector and then by
//! polarization index.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{unpack_pair, Fft3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RealizationKind {
    Torus,
    Manufactured,
}

/// Identifier of a basis mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeId {
    Torus { wavevector: [i32; 3], polarization: u8 },
    Manufactured(usize),
}

/// Parameters of the torus realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusParams {
    /// Box length `L`.
    pub length: f64,
    /// Collocation points per axis.
    pub n: usize,
    /// Fraction of the Nyquist band kept; `2/3` is the usual dealiasing rule.
    pub dealias: f64,
    /// Oversampling factor of the grid used for sup and Lq norms.
    pub oversample: usize,
}

impl TorusParams {
    pub fn new(n: usize) -> Self {
        Self { length: 2.0 * PI, n, dealias: 2.0 / 3.0, oversample: 2 }
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    pub fn with_dealias(mut self, dealias: f64) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn with_oversample(mut self, oversample: usize) -> Self {
        self.oversample = oversample;
        self
    }

    /// Largest retained wavenumber per axis: the largest integer strictly
    /// below `dealias * n / 2`, capped below the Nyquist index.
    pub fn kmax(&self) -> i32 {
        let band = self.dealias * self.n as f64 / 2.0;
        let k = (band - 1e-9).ceil() as i32 - 1;
        k.min(self.n as i32 / 2 - 1)
    }
}

/// Retained wavevector with its eigenvalue and polarization pair.
#[derive(Debug, Clone)]
pub struct Wavevector {
    pub m: [i32; 3],
    pub k: [f64; 3],
    pub lambda: f64,
    pub pol: [[f64; 3]; 2],
}

#[derive(Debug)]
pub struct TorusBasis {
    params: TorusParams,
    kmax: i32,
    wavevectors: Vec<Wavevector>,
    grid: Fft3,
    fine: Fft3,
}

#[derive(Debug)]
pub struct ManufacturedBasis {
    /// Columns are orthonormal eigenvectors, ordered like the eigenvalues.
    eigenvectors: DMatrix<f64>,
    matrix: DMatrix<f64>,
}

#[derive(Debug)]
pub enum Realization {
    Torus(TorusBasis),
    Manufactured(ManufacturedBasis),
}

/// Spectral realization of `A = -P Delta`: mode set, eigenvalues and transforms.
#[derive(Debug)]
pub struct StokesBasis {
    realization: Realization,
    eigenvalues: Vec<f64>,
    modes: Vec<ModeId>,
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalized(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

pub(crate) fn is_canonical(m: [i32; 3]) -> bool {
    m[0] > 0 || (m[0] == 0 && (m[1] > 0 || (m[1] == 0 && m[2] > 0)))
}

/// Orthonormal pair spanning the plane orthogonal to `m`.
pub(crate) fn polarizations(m: [i32; 3]) -> [[f64; 3]; 2] {
    let khat = normalized([m[0] as f64, m[1] as f64, m[2] as f64]);
    let axis = if m[0] == 0 && m[1] == 0 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let e1 = normalized(cross(khat, axis));
    let e2 = cross(khat, e1);
    [e1, e2]
}

impl StokesBasis {
    /// Torus realization with the retained set `|m_i| <= kmax`.
    pub fn torus(params: TorusParams) -> Result<Arc<Self>> {
        if !(params.length.is_finite() && params.length > 0.0) {
            return Err(Error::Domain(format!("box length must be positive, got {}", params.length)));
        }
        if params.n < 4 {
            return Err(Error::Domain(format!("resolution n must be at least 4, got {}", params.n)));
        }
        if !(params.dealias > 0.0 && params.dealias <= 1.0) {
            return Err(Error::Domain(format!("dealias fraction must lie in (0, 1], got {}", params.dealias)));
        }
        if params.oversample < 1 {
            return Err(Error::Domain("oversample factor must be at least 1".into()));
        }
        let kmax = params.kmax();
        if kmax < 1 {
            return Err(Error::Domain(format!(
                "no modes retained for n = {} and dealias = {}",
                params.n, params.dealias
            )));
        }
        let scale = 2.0 * PI / params.length;
        let mut wavevectors = Vec::new();
        for a in -kmax..=kmax {
            for b in -kmax..=kmax {
                for c in -kmax..=kmax {
                    let m = [a, b, c];
                    if !is_canonical(m) {
                        continue;
                    }
                    let k = [scale * a as f64, scale * b as f64, scale * c as f64];
                    wavevectors.push(Wavevector {
                        m,
                        k,
                        lambda: k[0] * k[0] + k[1] * k[1] + k[2] * k[2],
                        pol: polarizations(m),
                    });
                }
            }
        }
        wavevectors.sort_by_key(|w| (w.m[0] * w.m[0] + w.m[1] * w.m[1] + w.m[2] * w.m[2], w.m));
        let mut eigenvalues = Vec::with_capacity(2 * wavevectors.len());
        let mut modes = Vec::with_capacity(2 * wavevectors.len());
        for w in &wavevectors {
            for p in 0..2u8 {
                eigenvalues.push(w.lambda);
                modes.push(ModeId::Torus { wavevector: w.m, polarization: p });
            }
        }
        Ok(Arc::new(Self {
            realization: Realization::Torus(TorusBasis {
                params,
                kmax,
                wavevectors,
                grid: Fft3::new(params.n),
                fine: Fft3::new(params.n * params.oversample),
            }),
            eigenvalues,
            modes,
        }))
    }

    /// Manufactured realization: `A = Q diag(eigenvalues) Q^T` with a
    /// random orthogonal `Q` drawn from `seed`.
    pub fn manufactured(eigenvalues: Vec<f64>, seed: u64) -> Result<Arc<Self>> {
        if eigenvalues.is_empty() {
            return Err(Error::Domain("manufactured basis needs at least one eigenvalue".into()));
        }
        if eigenvalues.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::Domain("eigenvalues must be finite and strictly positive".into()));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("eigenvalues must be sorted ascending".into()));
        }
        let d = eigenvalues.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        let q = g.qr().q();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eigenvalues.clone()));
        let matrix: DMatrix<f64> = &q * lam * q.transpose();
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(Arc::new(Self {
            realization: Realization::Manufactured(ManufacturedBasis { eigenvectors: q, matrix }),
            modes: (0..d).map(ModeId::Manufactured).collect(),
            eigenvalues,
        }))
    }

    pub fn kind(&self) -> RealizationKind {
        match self.realization {
            Realization::Torus(_) => RealizationKind::Torus,
            Realization::Manufactured(_) => RealizationKind::Manufactured,
        }
    }

    pub fn realization(&self) -> &Realization {
        &self.realization
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest eigenvalue `lambda_1`.
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn torus_basis(&self) -> Result<&TorusBasis> {
        match &self.realization {
            Realization::Torus(t) => Ok(t),
            Realization::Manufactured(_) => {
                Err(Error::Structural("operation requires the torus realization".into()))
            }
        }
    }

    pub fn manufactured_basis(&self) -> Result<&ManufacturedBasis> {
        match &self.realization {
            Realization::Manufactured(m) => Ok(m),
            Realization::Torus(_) => {
                Err(Error::Structural("operation requires the manufactured realization".into()))
            }
        }
    }

    /// Two bases are compatible when they are the same object or describe
    /// the same torus.
    pub fn compatible(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        if Arc::ptr_eq(self, other) {
            return true;
        }
        match (&self.realization, &other.realization) {
            (Realization::Torus(a), Realization::Torus(b)) => a.params == b.params,
            _ => false,
        }
    }
}

impl ManufacturedBasis {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }
}

/// Real vector field sampled on an `m^3` periodic grid with spacing `L / m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub m: usize,
    pub length: f64,
    pub comps: [Vec<f64>; 3],
}

impl GridField {
    pub fn zeros(m: usize, length: f64) -> Self {
        let len = m * m * m;
        Self { m, length, comps: [vec![0.0; len], vec![0.0; len], vec![0.0; len]] }
    }

    /// Sample `f(x)` at the grid points `x = (i, j, l) L / m`.
    pub fn from_fn(m: usize, length: f64, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut g = Self::zeros(m, length);
        let h = length / m as f64;
        for i in 0..m {
            for j in 0..m {
                for l in 0..m {
                    let v = f([i as f64 * h, j as f64 * h, l as f64 * h]);
                    let idx = (i * m + j) * m + l;
                    for c in 0..3 {
                        g.comps[c][idx] = v[c];
                    }
                }
            }
        }
        g
    }

    pub fn magnitude_max(&self) -> f64 {
        (0..self.comps[0].len())
            .map(|i| {
                (self.comps[0][i].powi(2) + self.comps[1][i].powi(2) + self.comps[2][i].powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

impl TorusBasis {
    pub fn params(&self) -> &TorusParams {
        &self.params
    }

    pub fn kmax(&self) -> i32 {
        self.kmax
    }

    pub fn wavevectors(&self) -> &[Wavevector] {
        &self.wavevectors
    }

    pub fn grid(&self) -> &Fft3 {
        &self.grid
    }

    pub fn fine(&self) -> &Fft3 {
        &self.fine
    }

    /// Grid spacing of the collocation grid.
    pub fn spacing(&self) -> f64 {
        self.params.length / self.params.n as f64
    }

    /// Factor `s` with `u_hat(k) = s (c_0 e_0 + c_1 e_1)`.
    pub fn coefficient_scale(&self) -> f64 {
        1.0 / (2.0f64.sqrt() * self.params.length.powf(1.5))
    }

    fn fft_for(&self, m: usize) -> Fft3 {
        if m == self.grid.size() {
            self.grid.clone()
        } else if m == self.fine.size() {
            self.fine.clone()
        } else {
            Fft3::new(m)
        }
    }

    fn check_grid(&self, m: usize) -> Result<()> {
        if m < 2 * self.kmax as usize + 1 {
            return Err(Error::Structural(format!(
                "grid of size {m} cannot resolve retained wavenumbers up to {}",
                self.kmax
            )));
        }
        Ok(())
    }

    /// Fourier vector `u_hat(m)` of the canonical wavevector `w` from its two mode coefficients.
    #[inline]
    pub fn vector_coefficient(&self, w: usize, c: &[Complex64]) -> [Complex64; 3] {
        let s = self.coefficient_scale();
        let pol = &self.wavevectors[w].pol;
        let (c0, c1) = (c[2 * w], c[2 * w + 1]);
        [
            (c0 * pol[0][0] + c1 * pol[1][0]) * s,
            (c0 * pol[0][1] + c1 * pol[1][1]) * s,
            (c0 * pol[0][2] + c1 * pol[1][2]) * s,
        ]
    }

    /// Mode coefficients of the projection of `u_hat` onto the polarizations of `w`.
    #[inline]
    pub fn project_vector(&self, w: usize, v: [Complex64; 3]) -> [Complex64; 2] {
        let inv = 1.0 / self.coefficient_scale();
        let pol = &self.wavevectors[w].pol;
        let dot = |e: &[f64; 3]| (v[0] * e[0] + v[1] * e[1] + v[2] * e[2]) * inv;
        [dot(&pol[0]), dot(&pol[1])]
    }

    /// Hermitian spectra of the three velocity components on an `m^3` grid.
    pub fn spectra(&self, coeffs: &[Complex64], m: usize) -> [Vec<Complex64>; 3] {
        let fft = self.fft_for(m);
        let mut out = [vec![Complex64::default(); fft.len()], vec![Complex64::default(); fft.len()], vec![
            Complex64::default();
            fft.len()
        ]];
        for (w, wv) in self.wavevectors.iter().enumerate() {
            let v = self.vector_coefficient(w, coeffs);
            let ip = fft.index_of(wv.m);
            let im = fft.index_of([-wv.m[0], -wv.m[1], -wv.m[2]]);
            for c in 0..3 {
                out[c][ip] = v[c];
                out[c][im] = v[c].conj();
            }
        }
        out
    }

    /// Inverse-transform two Hermitian spectra at once; returns the two real fields.
    pub fn inverse_pair(&self, fft: &Fft3, a: &[Complex64], b: Option<&[Complex64]>) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        let mut data: Vec<Complex64> = match b {
            Some(b) => a.iter().zip(b).map(|(&x, &y)| x + i * y).collect(),
            None => a.to_vec(),
        };
        fft.inverse(&mut data);
        let re = data.iter().map(|z| z.re).collect();
        let im = if b.is_some() { data.iter().map(|z| z.im).collect() } else { Vec::new() };
        (re, im)
    }

    /// Grid samples of the field with mode coefficients `coeffs` on an `m^3` grid.
    pub fn synthesize(&self, coeffs: &[Complex64], m: usize) -> Result<GridField> {
        self.check_grid(m)?;
        let fft = self.fft_for(m);
        let [sx, sy, sz] = self.spectra(coeffs, m);
        let (x, y) = self.inverse_pair(&fft, &sx, Some(&sy));
        let (z, _) = self.inverse_pair(&fft, &sz, None);
        Ok(GridField { m, length: self.params.length, comps: [x, y, z] })
    }

    /// Forward transform of three real grid components, normalized so that
    /// entry `k` is the Fourier coefficient `u_hat(k)`.
    pub fn analyze(&self, fft: &Fft3, comps: [&[f64]; 3]) -> [Vec<Complex64>; 3] {
        let norm = 1.0 / fft.len() as f64;
        let mut xy: Vec<Complex64> =
            comps[0].iter().zip(comps[1]).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let mut z: Vec<Complex64> = comps[2].iter().map(|&a| Complex64::new(a, 0.0)).collect();
        fft.forward(&mut xy);
        fft.forward(&mut z);
        let mut sx = vec![Complex64::default(); fft.len()];
        let mut sy = vec![Complex64::default(); fft.len()];
        for wv in &self.wavevectors {
            for m in [wv.m, [-wv.m[0], -wv.m[1], -wv.m[2]]] {
                let ip = fft.index_of(m);
                let im = fft.index_of([-m[0], -m[1], -m[2]]);
                let (a, b) = unpack_pair(xy[ip], xy[im]);
                sx[ip] = a * norm;
                sy[ip] = b * norm;
            }
        }
        for v in z.iter_mut() {
            *v *= norm;
        }
        [sx, sy, z]
    }

    /// Leray projection of Fourier spectra onto the retained modes. The
    /// conjugate pair `(k, -k)` is averaged so only the real part of the
    /// underlying field contributes.
    pub fn project_spectra(&self, fft: &Fft3, spec: &[Vec<Complex64>; 3]) -> Vec<Complex64> {
        let mut coeffs = vec![Complex64::default(); 2 * self.wavevectors.len()];
        for (w, wv) in self.wavevectors.iter().enumerate() {
            let ip = fft.index_of(wv.m);
            let im = fft.index_of([-wv.m[0], -wv.m[1], -wv.m[2]]);
            let v = [
                (spec[0][ip] + spec[0][im].conj()) * 0.5,
                (spec[1][ip] + spec[1][im].conj()) * 0.5,
                (spec[2][ip] + spec[2][im].conj()) * 0.5,
            ];
            let c = self.project_vector(w, v);
            coeffs[2 * w] = c[0];
            coeffs[2 * w + 1] = c[1];
        }
        coeffs
    }

    /// Leray projection of a real grid field onto the retained modes.
    pub fn project_grid(&self, v: &GridField) -> Result<Vec<Complex64>> {
        if (v.length - self.params.length).abs() > 1e-12 * self.params.length {
            return Err(Error::Structural(format!(
                "grid box length {} does not match basis length {}",
                v.length, self.params.length
            )));
        }
        self.check_grid(v.m)?;
        let len = v.m * v.m * v.m;
        if v.comps.iter().any(|c| c.len() != len) {
            return Err(Error::Structural("grid component length does not match m^3".into()));
        }
        let fft = self.fft_for(v.m);
        let spec = self.analyze(&fft, [&v.comps[0], &v.comps[1], &v.comps[2]]);
        Ok(self.project_spectra(&fft, &spec))
    }

    /// Index of the canonical wavevector, if retained.
    pub fn wavevector_index(&self, m: [i32; 3]) -> Option<usize> {
        self.wavevectors.iter().position(|w| w.m == m)
    }
}
