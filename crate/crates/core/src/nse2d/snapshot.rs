//! Binary vorticity snapshots.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                                  |
//! |-------:|-----:|----------------------------------------|
//! | 0      | 4    | magic `FNVS`                           |
//! | 4      | 4    | format version (u32, currently 1)      |
//! | 8      | 4    | grid size N (u32)                      |
//! | 12     | 4    | reserved, zero                         |
//! | 16     | 8    | time t (f64)                           |
//! | 24     | 8    | viscosity ν (f64)                      |
//! | 32     | 8    | friction α (f64)                       |
//! | 40     | 8    | seed (u64)                             |
//! | 48     | 16·N²| coefficients ω̂, row-major `ix * N + iy`, each as (re f64, im f64) |

use super::state::VorticityState;
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"FNVS";
const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub n: usize,
    pub t: f64,
    pub nu: f64,
    pub alpha: f64,
    pub seed: u64,
}

pub fn encode(state: &VorticityState, nu: f64, alpha: f64, seed: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * state.coeffs.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(state.n as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    out.extend_from_slice(&nu.to_le_bytes());
    out.extend_from_slice(&alpha.to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    for c in &state.coeffs {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

fn f64_at(b: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(b[off..off + 8].try_into().expect("8 bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<(SnapshotHeader, VorticityState)> {
    if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
        return Err(Error::Validation("not a vorticity snapshot".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Validation(format!("unsupported snapshot version {version}")));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let header = SnapshotHeader {
        n,
        t: f64_at(bytes, 16),
        nu: f64_at(bytes, 24),
        alpha: f64_at(bytes, 32),
        seed: u64::from_le_bytes(bytes[40..48].try_into().expect("8 bytes")),
    };
    let expected = HEADER_LEN + 16 * n * n;
    if bytes.len() != expected {
        return Err(Error::Validation(format!(
            "snapshot length {} does not match N = {n} (expected {expected})",
            bytes.len()
        )));
    }
    let coeffs = bytes[HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| Complex64::new(f64_at(c, 0), f64_at(c, 8)))
        .collect();
    Ok((header, VorticityState { n, t: header.t, coeffs }))
}

pub fn write_snapshot(path: &Path, state: &VorticityState, nu: f64, alpha: f64, seed: u64) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(state, nu, alpha, seed))
        .map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, VorticityState)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nse2d::random_smooth_field;

    #[test]
    fn round_trip() {
        let mut s = random_smooth_field(16, 3.0, 1.0, 1);
        s.t = 1.25;
        let bytes = encode(&s, 1e-3, 0.5, 42);
        assert_eq!(bytes.len(), HEADER_LEN + 16 * 256);
        let (h, back) = decode(&bytes).unwrap();
        assert_eq!(h, SnapshotHeader { n: 16, t: 1.25, nu: 1e-3, alpha: 0.5, seed: 42 });
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_truncated() {
        let s = random_smooth_field(16, 3.0, 1.0, 1);
        let bytes = encode(&s, 0.0, 0.0, 0);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(b"nope").is_err());
    }
}
