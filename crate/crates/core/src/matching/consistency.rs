//! Pairwise spatial consistency between correspondences.

use super::correspondence::{Correspondence, CorrespondenceSet};
use crate::error::{Error, Result};

/// Dense row-major real matrix indexed by two correspondence sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ConsistencyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Element-wise product.
    pub fn hadamard(&self, other: &ConsistencyMatrix) -> Result<ConsistencyMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(ConsistencyMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }
}

/// Translation and rotation invariant measurement:
/// `| ||p_i - p_j|| - ||q_i - q_j|| |`.
#[inline]
pub fn trims_distance(a: &Correspondence, b: &Correspondence) -> f64 {
    ((a.src_point - b.src_point).norm() - (a.dst_point - b.dst_point).norm()).abs()
}

/// Binary indicator `d <= sigma`.
#[inline]
pub fn binary_score(d: f64, sigma: f64) -> f64 {
    if d <= sigma {
        1.0
    } else {
        0.0
    }
}

/// Gaussian weight `exp(-d^2 / (2 sigma^2))`.
#[inline]
pub fn gaussian_weight(d: f64, sigma: f64) -> f64 {
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "sigma_d must be > 0, got {sigma}"
        )))
    }
}

/// Binary (`S`) and Gaussian (`W`) consistency between every row and column correspondence.
pub fn consistency_matrices(
    rows: &CorrespondenceSet,
    cols: &CorrespondenceSet,
    sigma: f64,
) -> Result<(ConsistencyMatrix, ConsistencyMatrix)> {
    check_sigma(sigma)?;
    let mut s = ConsistencyMatrix::zeros(rows.len(), cols.len());
    let mut w = ConsistencyMatrix::zeros(rows.len(), cols.len());
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in cols.iter().enumerate() {
            let d = trims_distance(a, b);
            s.set(i, j, binary_score(d, sigma));
            w.set(i, j, gaussian_weight(d, sigma));
        }
    }
    Ok((s, w))
}

/// Binary consistency only.
pub fn binary_consistency(
    rows: &CorrespondenceSet,
    cols: &CorrespondenceSet,
    sigma: f64,
) -> Result<ConsistencyMatrix> {
    check_sigma(sigma)?;
    Ok(ConsistencyMatrix::from_fn(
        rows.len(),
        cols.len(),
        |i, j| binary_score(trims_distance(&rows.items()[i], &cols.items()[j]), sigma),
    ))
}

/// Weighted second-order consistency `S ⊙ ((A ⊙ B) · S)`, where `A` and
/// `B` are square over the row set (binary and weight matrices) and `S`
/// relates the row set to the column set.
///
/// Only entries where `S` is non-zero are evaluated, and only terms where
/// `A ⊙ B` is non-zero are summed; summation runs in ascending inner index.
pub fn second_order(
    row_binary: &ConsistencyMatrix,
    row_weights: &ConsistencyMatrix,
    cross: &ConsistencyMatrix,
) -> Result<ConsistencyMatrix> {
    let k = row_binary.rows();
    if row_binary.cols() != k
        || row_weights.rows() != k
        || row_weights.cols() != k
        || cross.rows() != k
    {
        return Err(Error::ShapeMismatch(format!(
            "second-order product needs {k}x{k} row matrices and a {k}xN cross matrix"
        )));
    }
    let n = cross.cols();
    let mut out = ConsistencyMatrix::zeros(k, n);
    let mut terms: Vec<(usize, f64)> = Vec::with_capacity(k);
    for i in 0..k {
        terms.clear();
        for l in 0..k {
            let a = row_binary.get(i, l) * row_weights.get(i, l);
            if a != 0.0 {
                terms.push((l, a));
            }
        }
        let mask = cross.row(i);
        for (j, &m) in mask.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for &(l, a) in &terms {
                acc += a * cross.data[l * n + j];
            }
            out.set(i, j, m * acc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use crate::matching::Stage;

    fn corr(p: [f64; 3], q: [f64; 3]) -> Correspondence {
        Correspondence::new(0, 0, Point3::from(p), Point3::from(q), 1.0)
    }

    #[test]
    fn trims_hand_example() {
        let a = corr([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let b = corr([3.0, 0.0, 0.0], [1.0, 5.0, 1.0]);
        assert!((trims_distance(&a, &b) - 1.0).abs() < 1e-15);
        assert_eq!(trims_distance(&a, &a), 0.0);
    }

    #[test]
    fn scores_at_reference_distances() {
        let sigma = 0.1;
        assert_eq!(binary_score(0.0, sigma), 1.0);
        assert_eq!(gaussian_weight(0.0, sigma), 1.0);
        assert_eq!(binary_score(sigma, sigma), 1.0);
        assert!((gaussian_weight(sigma, sigma) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((gaussian_weight(sigma, sigma) - 0.6065).abs() < 1e-4);
        assert_eq!(binary_score(2.0 * sigma, sigma), 0.0);
    }

    #[test]
    fn self_pairs_have_unit_diagonal() {
        let items = (0..4)
            .map(|i| {
                let x = i as f64;
                Correspondence::new(
                    i,
                    i,
                    Point3::new(x, x * x, 0.0),
                    Point3::new(0.0, x, 2.0 * x),
                    1.0,
                )
            })
            .collect();
        let set = CorrespondenceSet::new(items, Stage::Loose).unwrap();
        let (s, w) = consistency_matrices(&set, &set, 0.05).unwrap();
        for i in 0..4 {
            assert_eq!(s.get(i, i), 1.0);
            assert_eq!(w.get(i, i), 1.0);
            for j in 0..4 {
                assert_eq!(s.get(i, j), s.get(j, i));
                assert_eq!(w.get(i, j), w.get(j, i));
            }
        }
        assert!(consistency_matrices(&set, &set, 0.0).is_err());
    }
}
