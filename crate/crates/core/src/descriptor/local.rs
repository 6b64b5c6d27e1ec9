//! Handcrafted rotation-invariant neighborhood descriptor.
//!
//! A row concatenates three blocks, each scaled to unit length:
//! a soft histogram of neighbor distance over the support radius, a soft
//! histogram of the angle between neighbor offsets and the local normal
//! axis (least-variance eigenvector), and the three covariance eigen
//! features (linearity, planarity, sphericity). Neighbors are weighted by
//! `(1 - (d / r)^2)^2`, so every output varies continuously with the input
//! geometry.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::geom::{Point3, SpatialIndex};

/// Minimum neighbor count for a non-degenerate row.
pub const MIN_NEIGHBORS: usize = 3;

/// Neighborhoods larger than this are thinned to roughly this size by an
/// index hash, which keeps the subset independent of the cloud's pose.
pub const MAX_SUPPORT: usize = 256;

#[inline]
fn subsample_hash(i: usize) -> u64 {
    (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 17
}

/// Number of eigen features in the last block.
pub const EIGEN_BINS: usize = 3;

/// Bin split of a `d`-dimensional row: (distance bins, angle bins, eigen bins).
pub fn layout(dims: usize) -> (usize, usize, usize) {
    let rest = dims - EIGEN_BINS;
    let dist = rest / 2;
    (dist, rest - dist, EIGEN_BINS)
}

/// Descriptor row plus a flag for neighborhoods too small to describe.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDescriptor {
    pub row: Vec<f64>,
    pub weak: bool,
}

/// Uniform unit row emitted for weak points.
pub fn uniform_row(dims: usize) -> Vec<f64> {
    vec![1.0 / (dims as f64).sqrt(); dims]
}

#[inline]
fn soft_bin(hist: &mut [f64], t: f64, w: f64) {
    let n = hist.len();
    let pos = (t.clamp(0.0, 1.0) * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    hist[lo] += w * (1.0 - frac);
    if lo + 1 < n {
        hist[lo + 1] += w * frac;
    }
}

fn unit(block: &mut [f64]) {
    let n = block.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        block.iter_mut().for_each(|v| *v /= n);
    }
}

/// Eigen features `(linearity, planarity, sphericity)` from sorted eigenvalues
/// `l1 >= l2 >= l3`; they sum to one.
pub fn eigen_features(l1: f64, l2: f64, l3: f64) -> [f64; 3] {
    if l1 <= 0.0 {
        return [1.0 / 3.0; 3];
    }
    [(l1 - l2) / l1, (l2 - l3) / l1, l3 / l1]
}

/// Weighted covariance eigen decomposition, eigenvalues sorted descending.
pub(crate) fn local_frame(offsets: &[(Vector3<f64>, f64)]) -> ([f64; 3], Vector3<f64>) {
    let total: f64 = offsets.iter().map(|o| o.1).sum();
    let mean = offsets
        .iter()
        .fold(Vector3::zeros(), |acc, (v, w)| acc + v * *w)
        / total;
    let mut cov = Matrix3::zeros();
    for (v, w) in offsets {
        let c = v - mean;
        cov += c * c.transpose() * *w;
    }
    cov /= total;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = [
        eig.eigenvalues[order[0]].max(0.0),
        eig.eigenvalues[order[1]].max(0.0),
        eig.eigenvalues[order[2]].max(0.0),
    ];
    let normal = eig.eigenvectors.column(order[2]).into_owned();
    (vals, normal)
}

/// Describe the neighborhood of `center` within radius `r` in the indexed cloud.
pub fn local_geometry_descriptor(
    index: &SpatialIndex,
    center: &Point3,
    radius: f64,
    dims: usize,
) -> LocalDescriptor {
    let neighbors = index.radius_unsorted(center, radius);
    describe(index.points(), &neighbors, center, radius, dims)
}

pub(crate) fn describe(
    points: &[Point3],
    neighbors: &[(usize, f64)],
    center: &Point3,
    radius: f64,
    dims: usize,
) -> LocalDescriptor {
    let step = neighbors.len().div_ceil(MAX_SUPPORT).max(1) as u64;
    let mut weighted: Vec<(Vector3<f64>, f64)> = neighbors
        .iter()
        .filter(|&&(i, _)| step == 1 || subsample_hash(i).is_multiple_of(step))
        .filter_map(|&(i, d)| {
            let u = d / radius;
            let w = (1.0 - u * u).powi(2);
            (w > 0.0).then(|| (points[i] - center, w))
        })
        .collect();
    // fixed accumulation order regardless of tree layout
    weighted.sort_unstable_by(|a, b| a.0.norm_squared().total_cmp(&b.0.norm_squared()));
    if weighted.len() < MIN_NEIGHBORS {
        return LocalDescriptor {
            row: uniform_row(dims),
            weak: true,
        };
    }

    let (n_dist, n_angle, _) = layout(dims);
    let (vals, mut normal) = local_frame(&weighted);
    // orient the normal away from the bulk of the neighborhood mass
    if weighted
        .iter()
        .map(|(v, w)| w * v.dot(&normal))
        .sum::<f64>()
        < 0.0
    {
        normal = -normal;
    }
    let mut row = vec![0.0; dims];
    {
        let (dist_hist, rest) = row.split_at_mut(n_dist);
        let (angle_hist, eig) = rest.split_at_mut(n_angle);
        for (v, w) in &weighted {
            let d = v.norm();
            if d <= 1e-12 * radius {
                continue;
            }
            soft_bin(dist_hist, d / radius, *w);
            let c = (v.dot(&normal) / d).clamp(-1.0, 1.0);
            soft_bin(angle_hist, c.acos() / std::f64::consts::PI, *w);
        }
        unit(dist_hist);
        unit(angle_hist);
        eig.copy_from_slice(&eigen_features(vals[0], vals[1], vals[2]));
        unit(eig);
    }
    // blocks already unit length; equalize their contribution
    let s = 1.0 / 3f64.sqrt();
    row.iter_mut().for_each(|v| *v *= s);
    crate::features::normalize(&mut row);
    LocalDescriptor { row, weak: false }
}
