//! Loose one-to-many generation and strict consistency selection of
//! sparse correspondences.

use std::collections::BTreeMap;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::consistency::{
    binary_score, consistency_matrices, gaussian_weight, second_order, trims_distance,
    ConsistencyMatrix,
};
use super::correspondence::{Correspondence, CorrespondenceSet, Stage};
use crate::error::{Error, Result};
use crate::features::{dot, FeatureMatrix};
use crate::geom::PointCloud;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// One-to-many fan-out per source point.
    pub k_loose: usize,
    /// Number of spectral key correspondences.
    pub n_keys: usize,
    /// Correspondences kept per key by the second-order filter.
    pub k_refine: usize,
    /// Consistency threshold in meters.
    pub sigma_d: f64,
    pub power_tol: f64,
    pub power_max_iters: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            k_loose: 3,
            n_keys: 150,
            k_refine: 2,
            sigma_d: 0.1,
            power_tol: 1e-6,
            power_max_iters: 200,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_loose == 0 || self.n_keys == 0 || self.k_refine == 0 || self.power_max_iters == 0
        {
            return Err(Error::InvalidArgument("match counts must be >= 1".into()));
        }
        if !(self.sigma_d > 0.0) || !self.sigma_d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigma_d must be > 0, got {}",
                self.sigma_d
            )));
        }
        if !(self.power_tol > 0.0) {
            return Err(Error::InvalidArgument("power_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Cosine similarity matrix between the rows of two feature matrices.
pub fn feature_similarity(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<DMatrix<f64>> {
    if a.dims() != b.dims() {
        return Err(Error::ShapeMismatch(format!(
            "feature dims {} vs {}",
            a.dims(),
            b.dims()
        )));
    }
    let a = a.clone().normalized();
    let b = b.clone().normalized();
    Ok(DMatrix::from_fn(a.rows(), b.rows(), |i, j| {
        dot(a.row(i), b.row(j))
    }))
}

/// Indices of the `k` largest values, descending; ties go to the lower index.
pub(crate) fn top_k_desc(values: impl Iterator<Item = f64>, k: usize) -> Vec<(usize, f64)> {
    let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
    if k == 0 {
        return best;
    }
    for (j, v) in values.enumerate() {
        if best.len() == k && v <= best[k - 1].1 {
            continue;
        }
        let pos = best.partition_point(|&(_, b)| b >= v);
        best.insert(pos, (j, v));
        best.truncate(k);
    }
    best
}

/// For every source row, its `k_loose` most similar target rows.
pub fn one_to_many_generate(
    src_feats: &FeatureMatrix,
    dst_feats: &FeatureMatrix,
    src_pts: &PointCloud,
    dst_pts: &PointCloud,
    k_loose: usize,
) -> Result<CorrespondenceSet> {
    generate(
        src_feats,
        dst_feats,
        src_pts,
        dst_pts,
        k_loose,
        Stage::Loose,
    )
}

pub(crate) fn generate(
    src_feats: &FeatureMatrix,
    dst_feats: &FeatureMatrix,
    src_pts: &PointCloud,
    dst_pts: &PointCloud,
    k_loose: usize,
    stage: Stage,
) -> Result<CorrespondenceSet> {
    if src_feats.rows() != src_pts.len() || dst_feats.rows() != dst_pts.len() {
        return Err(Error::ShapeMismatch(
            "feature rows must match point counts".into(),
        ));
    }
    if k_loose == 0 || k_loose > dst_pts.len() {
        return Err(Error::InvalidArgument(format!(
            "k_loose {k_loose} outside 1..={}",
            dst_pts.len()
        )));
    }
    if src_feats.dims() != dst_feats.dims() {
        return Err(Error::ShapeMismatch(format!(
            "feature dims {} vs {}",
            src_feats.dims(),
            dst_feats.dims()
        )));
    }
    let a = src_feats.clone().normalized();
    let b = dst_feats.clone().normalized();
    let mut items = Vec::with_capacity(src_pts.len() * k_loose);
    for i in 0..a.rows() {
        let row = a.row(i);
        let best = top_k_desc((0..b.rows()).map(|j| dot(row, b.row(j))), k_loose);
        for (j, sim) in best {
            items.push(Correspondence::new(
                i,
                j,
                src_pts[i],
                dst_pts[j],
                sim.max(0.0),
            ));
        }
    }
    Ok(CorrespondenceSet::from_unique(items, stage))
}

/// Outcome of spectral screening.
#[derive(Debug, Clone, PartialEq)]
pub struct KeySelection {
    pub keys: CorrespondenceSet,
    /// Positions of the keys within the screened set, ascending.
    pub positions: Vec<usize>,
    /// Leading eigenvector of the compatibility matrix.
    pub eigenvector: Vec<f64>,
    pub iterations: usize,
    /// Fewer correspondences than requested keys; everything was returned.
    pub saturated: bool,
}

/// Leading eigenvector of a symmetric non-negative matrix by power iteration
/// from the all-ones vector.
pub fn leading_eigenvector(m: &ConsistencyMatrix, tol: f64, max_iters: usize) -> (Vec<f64>, usize) {
    let n = m.rows();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    let mut iters = 0;
    while iters < max_iters {
        iters += 1;
        for (i, o) in next.iter_mut().enumerate() {
            *o = dot(m.row(i), &v);
        }
        let norm = dot(&next, &next).sqrt();
        if norm == 0.0 {
            break;
        }
        next.iter_mut().for_each(|x| *x /= norm);
        let delta: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut v, &mut next);
        if delta < tol {
            break;
        }
    }
    (v, iters)
}

/// Spectral compatibility matrix: Gaussian TRIMs weights with a zero diagonal.
pub fn spectral_compatibility(g: &CorrespondenceSet, sigma: f64) -> ConsistencyMatrix {
    let items = g.items();
    let n = items.len();
    let mut m = ConsistencyMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let w = gaussian_weight(trims_distance(&items[i], &items[j]), sigma);
            m.set(i, j, w);
            m.set(j, i, w);
        }
    }
    m
}

/// Screen the `n_keys` correspondences with the largest leading-eigenvector
/// entries of the spectral compatibility matrix.
pub fn spectral_key_selection(
    g: &CorrespondenceSet,
    sigma: f64,
    n_keys: usize,
    tol: f64,
    max_iters: usize,
) -> Result<KeySelection> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma_d must be > 0, got {sigma}"
        )));
    }
    if n_keys == 0 {
        return Err(Error::InvalidArgument("n_keys must be >= 1".into()));
    }
    let compat = spectral_compatibility(g, sigma);
    let (eigenvector, iterations) = if g.is_empty() {
        (Vec::new(), 0)
    } else {
        leading_eigenvector(&compat, tol, max_iters)
    };
    let saturated = g.len() < n_keys;
    if saturated {
        warn!(
            "only {} correspondences for {} spectral keys",
            g.len(),
            n_keys
        );
    }
    let mut positions: Vec<usize> = top_k_desc(eigenvector.iter().copied(), n_keys.min(g.len()))
        .into_iter()
        .map(|(i, _)| i)
        .collect();
    positions.sort_unstable();
    Ok(KeySelection {
        keys: g.subset(&positions, Stage::Key),
        positions,
        eigenvector,
        iterations,
        saturated,
    })
}

/// `S*_s = S_s ⊙ ((S_k ⊙ W_k) · S_s)` between keys and all correspondences.
pub fn second_order_matrix(
    keys: &CorrespondenceSet,
    all: &CorrespondenceSet,
    sigma: f64,
) -> Result<ConsistencyMatrix> {
    let (key_binary, key_weights) = consistency_matrices(keys, keys, sigma)?;
    let key_all = ConsistencyMatrix::from_fn(keys.len(), all.len(), |i, j| {
        binary_score(trims_distance(&keys.items()[i], &all.items()[j]), sigma)
    });
    second_order(&key_binary, &key_weights, &key_all)
}

/// Keep, for every key, the `k_refine` correspondences with the highest
/// positive second-order score. Duplicates across keys keep their best score;
/// output follows the order of `all`.
pub fn second_order_filter(
    keys: &CorrespondenceSet,
    all: &CorrespondenceSet,
    sigma: f64,
    k_refine: usize,
) -> Result<CorrespondenceSet> {
    if k_refine == 0 {
        return Err(Error::InvalidArgument("k_refine must be >= 1".into()));
    }
    let scores = second_order_matrix(keys, all, sigma)?;
    let mut chosen: BTreeMap<usize, f64> = BTreeMap::new();
    for i in 0..scores.rows() {
        for (j, s) in top_k_desc(scores.row(i).iter().copied(), k_refine) {
            if s <= 0.0 {
                continue;
            }
            chosen
                .entry(j)
                .and_modify(|best| *best = best.max(s))
                .or_insert(s);
        }
    }
    let items = chosen
        .into_iter()
        .map(|(j, s)| Correspondence {
            score: s,
            ..all.items()[j]
        })
        .collect();
    Ok(CorrespondenceSet::from_unique(items, Stage::Refined))
}
