//! Norms of spectral fields.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::SpectralField;

/// Which norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// Parseval sum of squared coefficients.
    L2,
    /// `||A^{1/2} u||`, equal to `||grad u||` for divergence-free fields.
    H1,
    /// `(||u||^2 + ||A u||^2)^{1/2}`.
    H2,
    /// Grid quadrature of `|u|^q` on the oversampled grid.
    Lq(f64),
    /// Maximum of `|u(x)|` over the oversampled grid. This never exceeds
    /// the true supremum of the trigonometric polynomial.
    Sup,
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "l2" => Ok(NormKind::L2),
            "h1" => Ok(NormKind::H1),
            "h2" => Ok(NormKind::H2),
            "sup" | "linf" | "inf" => Ok(NormKind::Sup),
            _ => {
                if let Some(q) = t.strip_prefix('l') {
                    if let Ok(q) = q.parse::<f64>() {
                        return Ok(NormKind::Lq(q));
                    }
                }
                Err(Error::Domain(format!("unknown norm kind '{s}'")))
            }
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::L2 => write!(f, "L2"),
            NormKind::H1 => write!(f, "H1"),
            NormKind::H2 => write!(f, "H2"),
            NormKind::Lq(q) => write!(f, "L{q}"),
            NormKind::Sup => write!(f, "sup"),
        }
    }
}

/// Weighted Parseval sum `sum_j lambda_j^p |c_j|^2`.
pub fn weighted_sq(u: &SpectralField, power: i32) -> f64 {
    let ev = u.basis().eigenvalues();
    u.coeffs()
        .iter()
        .zip(ev)
        .map(|(c, &l)| {
            let w = match power {
                0 => 1.0,
                1 => l,
                2 => l * l,
                p => l.powi(p),
            };
            w * c.norm_sqr()
        })
        .sum()
}

pub fn norm(u: &SpectralField, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::L2 => Ok(weighted_sq(u, 0).sqrt()),
        NormKind::H1 => Ok(weighted_sq(u, 1).sqrt()),
        NormKind::H2 => Ok((weighted_sq(u, 0) + weighted_sq(u, 2)).sqrt()),
        NormKind::Sup => {
            if u.is_zero() {
                return Ok(0.0);
            }
            Ok(u.fine_samples()?.magnitude_max())
        }
        NormKind::Lq(q) => {
            if !(q >= 1.0) || !q.is_finite() {
                return Err(Error::Domain(format!("Lq norm needs finite q >= 1, got {q}")));
            }
            let g = u.fine_samples()?;
            let h = g.length / g.m as f64;
            let vol = h * h * h;
            let sum: f64 = (0..g.comps[0].len())
                .map(|i| {
                    let m2 = g.comps[0][i].powi(2) + g.comps[1][i].powi(2) + g.comps[2][i].powi(2);
                    m2.powf(q / 2.0)
                })
                .sum();
            Ok((sum * vol).powf(1.0 / q))
        }
    }
}

/// `||A u||_{L2}`.
pub fn a_norm(u: &SpectralField) -> f64 {
    weighted_sq(u, 2).sqrt()
}
