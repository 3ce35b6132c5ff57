//! Three-dimensional complex FFT on a cubic grid, plus helpers for packing
//! two real fields into one complex transform.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Cubic `m x m x m` complex FFT with row-major `[ix][iy][iz]` layout.
///
/// `inverse` is unnormalized with a `+i` exponent, so placing Fourier
/// coefficients `u_hat(k)` and calling `inverse` yields grid samples
/// `sum_k u_hat(k) exp(i k.x)`. `forward` is unnormalized with `-i`.
#[derive(Clone)]
pub struct Fft3 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft3").field("m", &self.m).finish()
    }
}

impl Fft3 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(&*self.fwd, data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(&*self.inv, data);
    }

    fn transform(&self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        let m = self.m;
        assert_eq!(data.len(), m * m * m, "grid buffer has wrong length");
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // z lines are contiguous
        plan.process_with_scratch(data, &mut scratch);

        let mut lines = vec![Complex64::default(); data.len()];
        // y lines
        for ix in 0..m {
            for iy in 0..m {
                for iz in 0..m {
                    lines[(ix * m + iz) * m + iy] = data[(ix * m + iy) * m + iz];
                }
            }
        }
        plan.process_with_scratch(&mut lines, &mut scratch);
        for ix in 0..m {
            for iy in 0..m {
                for iz in 0..m {
                    data[(ix * m + iy) * m + iz] = lines[(ix * m + iz) * m + iy];
                }
            }
        }
        // x lines
        for ix in 0..m {
            for iy in 0..m {
                for iz in 0..m {
                    lines[(iy * m + iz) * m + ix] = data[(ix * m + iy) * m + iz];
                }
            }
        }
        plan.process_with_scratch(&mut lines, &mut scratch);
        for ix in 0..m {
            for iy in 0..m {
                for iz in 0..m {
                    data[(ix * m + iy) * m + iz] = lines[(iy * m + iz) * m + ix];
                }
            }
        }
    }

    /// Flat index of the (wrapped) integer wavevector `k`.
    pub fn index_of(&self, k: [i32; 3]) -> usize {
        let m = self.m as i32;
        let w = |c: i32| c.rem_euclid(m) as usize;
        (w(k[0]) * self.m + w(k[1])) * self.m + w(k[2])
    }
}

/// Separate the spectra of two real fields `a`, `b` from the forward
/// transform `f` of `a + i b`: returns `(A(k), B(k))` given `f(k)` and `f(-k)`.
#[inline]
pub fn unpack_pair(fk: Complex64, fmk: Complex64) -> (Complex64, Complex64) {
    let c = fmk.conj();
    let a = (fk + c) * 0.5;
    let b = (fk - c) * Complex64::new(0.0, -0.5);
    (a, b)
}
