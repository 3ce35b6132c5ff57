//! Binary checkpoint of a [`SpectralField`].
//!
//! Layout (all multi-byte values little-endian):
//!
//! | offset | size | content                                          |
//! |-------:|-----:|--------------------------------------------------|
//! | 0      | 4    | magic `TNS1`                                     |
//! | 4      | 1    | endianness marker, `0x01` = little               |
//! | 5      | 1    | realization kind, `0` torus, `1` manufactured    |
//! | 6      | 2    | reserved, zero                                   |
//! | 8      | 8    | box length `L` (f64; `0` for manufactured)       |
//! | 16     | 8    | resolution `n` (u64; `0` for manufactured)       |
//! | 24     | 8    | dealias fraction (f64; `0` for manufactured)     |
//! | 32     | 8    | mode count (u64)                                 |
//! | 40     | 16 c | coefficients, `(re, im)` f64 pairs in mode order |

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::basis::{Realization, StokesBasis, TorusParams};
use crate::error::{Error, Result};
use crate::field::SpectralField;

pub const MAGIC: &[u8; 4] = b"TNS1";
pub const LITTLE_ENDIAN_MARKER: u8 = 1;
pub const HEADER_LEN: usize = 40;

/// Parsed checkpoint header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub kind: u8,
    pub length: f64,
    pub n: u64,
    pub dealias: f64,
    pub mode_count: u64,
}

pub fn save<W: Write>(u: &SpectralField, mut w: W) -> Result<()> {
    let (kind, length, n, dealias) = match u.basis().realization() {
        Realization::Torus(t) => (0u8, t.params().length, t.params().n as u64, t.params().dealias),
        Realization::Manufactured(_) => (1u8, 0.0, 0, 0.0),
    };
    let mut buf = Vec::with_capacity(HEADER_LEN + 16 * u.len());
    buf.extend_from_slice(MAGIC);
    buf.push(LITTLE_ENDIAN_MARKER);
    buf.push(kind);
    buf.extend_from_slice(&[0, 0]);
    buf.extend_from_slice(&length.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&dealias.to_le_bytes());
    buf.extend_from_slice(&(u.len() as u64).to_le_bytes());
    for c in u.coeffs() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn f64_at(b: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(b[off..off + 8].try_into().expect("8 bytes"))
}

fn u64_at(b: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(b[off..off + 8].try_into().expect("8 bytes"))
}

pub fn read_header(b: &[u8]) -> Result<Header> {
    if b.len() < HEADER_LEN {
        return Err(Error::Format(format!("truncated header ({} bytes)", b.len())));
    }
    if &b[0..4] != MAGIC {
        return Err(Error::Format("bad magic, expected TNS1".into()));
    }
    if b[4] != LITTLE_ENDIAN_MARKER {
        return Err(Error::Format(format!("unsupported endianness marker {}", b[4])));
    }
    if b[5] > 1 {
        return Err(Error::Format(format!("unknown realization kind {}", b[5])));
    }
    Ok(Header { kind: b[5], length: f64_at(b, 8), n: u64_at(b, 16), dealias: f64_at(b, 24), mode_count: u64_at(b, 32) })
}

/// Read a checkpoint. Torus checkpoints rebuild their basis (oversampling 2)
/// unless `basis` is given, in which case it must match the header.
/// Manufactured checkpoints always need `basis`.
pub fn load<R: Read>(mut r: R, basis: Option<&Arc<StokesBasis>>) -> Result<SpectralField> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let h = read_header(&bytes)?;
    let basis = match (h.kind, basis) {
        (0, Some(b)) => {
            let t = b.torus_basis()?;
            let p = t.params();
            if p.length != h.length || p.n as u64 != h.n || p.dealias != h.dealias {
                return Err(Error::Structural(format!(
                    "checkpoint torus (L={}, n={}, dealias={}) does not match basis (L={}, n={}, dealias={})",
                    h.length, h.n, h.dealias, p.length, p.n, p.dealias
                )));
            }
            b.clone()
        }
        (0, None) => StokesBasis::torus(
            TorusParams::new(h.n as usize).with_length(h.length).with_dealias(h.dealias),
        )?,
        (_, Some(b)) => {
            b.manufactured_basis()?;
            b.clone()
        }
        (_, None) => {
            return Err(Error::Structural("manufactured checkpoints need their basis supplied".into()));
        }
    };
    if h.mode_count as usize != basis.len() {
        return Err(Error::Structural(format!(
            "checkpoint has {} modes, basis has {}",
            h.mode_count,
            basis.len()
        )));
    }
    let expected = HEADER_LEN + 16 * basis.len();
    if bytes.len() != expected {
        return Err(Error::Format(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let coeffs = (0..basis.len())
        .map(|j| {
            let off = HEADER_LEN + 16 * j;
            Complex64::new(f64_at(&bytes, off), f64_at(&bytes, off + 8))
        })
        .collect();
    SpectralField::from_coeffs(&basis, coeffs)
}

pub fn save_path(u: &SpectralField, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, |w| save(u, w))
}

pub fn load_path(path: &Path, basis: Option<&Arc<StokesBasis>>) -> Result<SpectralField> {
    load(BufReader::new(File::open(path)?), basis)
}
