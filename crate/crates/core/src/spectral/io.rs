//! Field snapshot serialization.
//!
//! Binary layout: `d: u64`, `n: u64`, `L: f64` (little endian), then
//! `n^d` pairs of little-endian `f64` (re, im) in row-major order.

use std::io::{Read, Write};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::Field;
use super::grid::Grid;
use crate::error::{Error, Result};

/// Largest grid (in points) for which a JSON snapshot is also written.
pub const JSON_SNAPSHOT_LIMIT: usize = 4096;

pub fn write_binary<W: Write>(field: &Field, mut w: W) -> Result<()> {
    let g = field.grid();
    let mut buf = Vec::with_capacity(24 + 16 * g.len_total());
    buf.extend_from_slice(&(g.dim() as u64).to_le_bytes());
    buf.extend_from_slice(&(g.n() as u64).to_le_bytes());
    buf.extend_from_slice(&g.length().to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Field> {
    let mut head = [0u8; 24];
    r.read_exact(&mut head)?;
    let word = |i: usize| -> [u8; 8] { head[8 * i..8 * i + 8].try_into().unwrap() };
    let d = u64::from_le_bytes(word(0)) as usize;
    let n = u64::from_le_bytes(word(1)) as usize;
    let len = f64::from_le_bytes(word(2));
    let grid = Grid::new(d, n, len)?;
    let mut payload = vec![0u8; 16 * grid.len_total()];
    r.read_exact(&mut payload)?;
    let values = payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Field::new(grid, values)
}

#[derive(Serialize, Deserialize)]
pub struct SnapshotJson {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub len: f64,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl SnapshotJson {
    pub fn from_field(field: &Field) -> Self {
        let g = field.grid();
        SnapshotJson {
            d: g.dim(),
            n: g.n(),
            len: g.length(),
            re: field.values().iter().map(|v| v.re).collect(),
            im: field.values().iter().map(|v| v.im).collect(),
        }
    }

    pub fn into_field(self) -> Result<Field> {
        if self.re.len() != self.im.len() {
            return Err(Error::Field("re/im arrays differ in length".into()));
        }
        let grid = Grid::new(self.d, self.n, self.len)?;
        let values = self.re.into_iter().zip(self.im).map(|(a, b)| Complex64::new(a, b)).collect();
        Field::new(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn binary_layout() {
        let g = make_grid(1, 8, 4.0).unwrap();
        let u = Field::from_fn(&g, |p| Complex64::new(p[0], -2.0 * p[0])).unwrap();
        let mut bytes = Vec::new();
        write_binary(&u, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 24 + 16 * 8);
        assert_eq!(&bytes[..8], &1u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &8u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &4.0f64.to_le_bytes());
        assert_eq!(&bytes[24..32], &(-2.0f64).to_le_bytes());
        assert_eq!(&bytes[32..40], &4.0f64.to_le_bytes());
        let back = read_binary(&bytes[..]).unwrap();
        assert_eq!(back.values(), u.values());
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let g = make_grid(1, 8, 4.0).unwrap();
        let mut bytes = Vec::new();
        write_binary(&Field::zeros(&g), &mut bytes).unwrap();
        bytes.truncate(100);
        assert!(read_binary(&bytes[..]).is_err());
    }
}
