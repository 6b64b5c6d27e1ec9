//! Dense per-point feature rows and their on-disk cache format.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// File magic for cached feature dumps.
pub const FEATURE_MAGIC: u64 = u64::from_le_bytes(*b"XREGFEAT");

/// Row-major `n x d` matrix with one descriptor row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dims: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, dims: usize) -> Self {
        Self {
            rows,
            dims,
            data: vec![0.0; rows * dims],
        }
    }

    pub fn from_vec(rows: usize, dims: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dims {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{dims} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "feature values must be finite".into(),
            ));
        }
        Ok(Self { rows, dims, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dims) {
            return Err(Error::ShapeMismatch("ragged feature rows".into()));
        }
        Self::from_vec(rows.len(), dims, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.dims)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dims.max(1)).take(self.rows)
    }

    /// Rows at the given indices.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.dims);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: indices.len(),
            dims: self.dims,
            data,
        }
    }

    /// L2-normalize every row in place; zero rows stay zero.
    pub fn normalize_rows(&mut self) {
        for i in 0..self.rows {
            normalize(self.row_mut(i));
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize_rows();
        self
    }

    /// Write the cache format: magic, n, d as u64 LE, then n*d f32 LE row-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&FEATURE_MAGIC.to_le_bytes())?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.dims as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        if u64::from_le_bytes(word) != FEATURE_MAGIC {
            return Err(Error::Parse("not a feature dump (bad magic)".into()));
        }
        r.read_exact(&mut word)?;
        let rows = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let dims = u64::from_le_bytes(word) as usize;
        let count = rows
            .checked_mul(dims)
            .ok_or_else(|| Error::Parse("feature dump header overflows".into()))?;
        let mut buf = vec![0u8; count * 4];
        r.read_exact(&mut buf)?;
        let data = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::from_vec(rows, dims, data)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn normalize(row: &mut [f64]) {
    let n = dot(row, row).sqrt();
    if n > 0.0 {
        row.iter_mut().for_each(|v| *v /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip_is_f32_exact() {
        let m = FeatureMatrix::from_vec(2, 3, vec![0.1, -0.2, 0.3, 1.0, 0.0, 1e-3]).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 6 * 4);
        assert_eq!(&buf[..8], b"XREGFEAT");
        let back = FeatureMatrix::read_from(&buf[..]).unwrap();
        assert_eq!(back.shape(), (2, 3));
        for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let m = FeatureMatrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert!(FeatureMatrix::read_from(&buf[..buf.len() - 1]).is_err());
        buf[0] ^= 0xff;
        assert!(matches!(
            FeatureMatrix::read_from(&buf[..]),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn normalization() {
        let mut m = FeatureMatrix::from_vec(2, 2, vec![3.0, 4.0, 0.0, 0.0]).unwrap();
        m.normalize_rows();
        assert_eq!(m.row(0), &[0.6, 0.8]);
        assert_eq!(m.row(1), &[0.0, 0.0]);
    }
}
