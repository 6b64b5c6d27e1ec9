//! Weighted Kabsch estimation and truncated-chamfer hypothesis selection.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PointCloud, RigidTransform, SpatialIndex};
use crate::matching::Correspondence;

/// Relative singular-value floor below which the cross-covariance is treated
/// as rank one (collinear support).
const RANK_TOL: f64 = 1e-12;

/// Closed-form minimizer of `sum w_i ||R p_i + t - q_i||^2`.
pub fn weighted_svd(corrs: &[Correspondence], weights: &[f64]) -> Result<RigidTransform> {
    if corrs.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} correspondences but {} weights",
            corrs.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument(
            "weights must be finite and non-negative".into(),
        ));
    }
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if positive < 3 {
        return Err(Error::Degenerate(format!(
            "weighted SVD needs 3 positively weighted pairs, got {positive}"
        )));
    }
    let total: f64 = weights.iter().sum();
    let mut p_mean = Vector3::zeros();
    let mut q_mean = Vector3::zeros();
    for (c, &w) in corrs.iter().zip(weights) {
        let w = w / total;
        p_mean += c.src_point.coords * w;
        q_mean += c.dst_point.coords * w;
    }
    let mut h = Matrix3::zeros();
    for (c, &w) in corrs.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let p = c.src_point.coords - p_mean;
        let q = c.dst_point.coords - q_mean;
        h += p * q.transpose() * (w / total);
    }
    let svd = h.svd(true, true);
    let mut sv = svd.singular_values;
    sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= RANK_TOL * sv[0] {
        return Err(Error::Degenerate("correspondences are collinear".into()));
    }
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V^T").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let translation = q_mean - rotation * p_mean;
    Ok(RigidTransform::from_parts_unchecked(rotation, translation))
}

/// Candidate transform with its selection statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub transform: RigidTransform,
    pub group_id: usize,
    pub inlier_count: usize,
    /// Weighted mean residual of the group the transform was estimated from.
    pub mean_residual: f64,
}

/// Number of source points that land within `tau0` of some target point.
pub fn truncated_chamfer_count(
    t: &RigidTransform,
    src: &PointCloud,
    dst_index: &SpatialIndex,
    tau0: f64,
) -> usize {
    src.iter()
        .filter(|p| {
            let q = t.apply(p);
            dst_index.knn(&q, 1).is_ok_and(|nn| nn[0].1 < tau0)
        })
        .count()
}

/// Pick the candidate with the largest truncated-chamfer count; ties go to
/// the earliest candidate. Returns the winner's position and every count.
pub fn hypothesis_select(
    candidates: &[RigidTransform],
    src_sparse: &PointCloud,
    dst_sparse: &PointCloud,
    tau0: f64,
) -> Result<(usize, Vec<usize>)> {
    if candidates.is_empty() {
        return Err(Error::Empty("hypothesis candidates"));
    }
    if src_sparse.is_empty() || dst_sparse.is_empty() {
        return Err(Error::Empty("hypothesis selection clouds"));
    }
    let index = SpatialIndex::build(dst_sparse);
    let counts: Vec<usize> = candidates
        .iter()
        .map(|t| truncated_chamfer_count(t, src_sparse, &index, tau0))
        .collect();
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Ok((best, counts))
}
