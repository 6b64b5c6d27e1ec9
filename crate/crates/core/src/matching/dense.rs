//! Prior-guided global dense matching: every refined sparse correspondence
//! gathers the dense correspondences that are second-order consistent with it.

use std::io::Write;

use super::consistency::{
    binary_consistency, consistency_matrices, second_order, ConsistencyMatrix,
};
use super::correspondence::{Correspondence, CorrespondenceSet, Stage};
use super::sparse::{generate, top_k_desc};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::geom::PointCloud;

/// Default cap on the size of one dense group.
pub const DEFAULT_K_GROUP: usize = 250;

/// Dense correspondences gathered around one sparse prior.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGroup {
    /// Row of the prior in the refined sparse set.
    pub prior: usize,
    pub members: CorrespondenceSet,
    /// Second-order score of every member, all positive.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseGroupSet {
    pub groups: Vec<DenseGroup>,
}

impl DenseGroupSet {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn total_members(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }

    /// Distinct members over all groups, in dense-set order.
    pub fn union(&self) -> CorrespondenceSet {
        let mut all: Vec<Correspondence> = self
            .groups
            .iter()
            .flat_map(|g| g.members.iter().copied())
            .collect();
        all.sort_by_key(|c| c.key());
        all.dedup_by_key(|c| c.key());
        CorrespondenceSet::from_unique(all, Stage::DenseGroup)
    }

    /// CSV rows `group_id,src_index,dst_index,weight`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "group_id,src_index,dst_index,weight")?;
        for (gid, g) in self.groups.iter().enumerate() {
            for (c, wt) in g.members.iter().zip(&g.weights) {
                writeln!(w, "{gid},{},{},{wt}", c.src_index, c.dst_index)?;
            }
        }
        Ok(())
    }
}

/// One-to-many generation on the dense features.
pub fn dense_loose_generate(
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
        Stage::DenseLoose,
    )
}

/// Binary `|Ĝ'| x |G̃|` matrix of TRIMs consistency between priors and dense pairs.
pub fn sparse_to_dense_consistency(
    priors: &CorrespondenceSet,
    dense: &CorrespondenceSet,
    sigma: f64,
) -> Result<ConsistencyMatrix> {
    if priors.is_empty() {
        return Err(Error::Empty(
            "refined sparse correspondences (sparse matching failed)",
        ));
    }
    if dense.is_empty() {
        return Err(Error::Empty("loose dense correspondences"));
    }
    binary_consistency(priors, dense, sigma)
}

/// `S*_s2d = S_s2d ⊙ ((S'_s ⊙ W'_s) · S_s2d)`.
pub fn sparse_to_dense_second_order(
    priors: &CorrespondenceSet,
    dense: &CorrespondenceSet,
    sigma: f64,
) -> Result<ConsistencyMatrix> {
    let cross = sparse_to_dense_consistency(priors, dense, sigma)?;
    let (binary, weights) = consistency_matrices(priors, priors, sigma)?;
    second_order(&binary, &weights, &cross)
}

/// Top-`k_group` positive entries of every prior row become that prior's group.
pub fn prior_guided_group_select(
    priors: &CorrespondenceSet,
    dense: &CorrespondenceSet,
    sigma: f64,
    k_group: usize,
) -> Result<DenseGroupSet> {
    if k_group == 0 {
        return Err(Error::InvalidArgument("k_group must be >= 1".into()));
    }
    let scores = sparse_to_dense_second_order(priors, dense, sigma)?;
    let mut groups = Vec::new();
    for i in 0..scores.rows() {
        let picks: Vec<(usize, f64)> = top_k_desc(scores.row(i).iter().copied(), k_group)
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .collect();
        if picks.is_empty() {
            continue;
        }
        let members = picks
            .iter()
            .map(|&(j, s)| Correspondence {
                score: s,
                ..dense.items()[j]
            })
            .collect();
        groups.push(DenseGroup {
            prior: i,
            members: CorrespondenceSet::from_unique(members, Stage::DenseGroup),
            weights: picks.iter().map(|p| p.1).collect(),
        });
    }
    if groups.is_empty() {
        return Err(Error::Degenerate(
            "no dense correspondence is consistent with any sparse prior".into(),
        ));
    }
    Ok(DenseGroupSet { groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;

    fn pair(p: [f64; 3], q: [f64; 3], i: usize) -> Correspondence {
        Correspondence::new(i, i, Point3::from(p), Point3::from(q), 1.0)
    }

    #[test]
    fn hand_example_inconsistent() {
        let priors =
            CorrespondenceSet::new(vec![pair([0.0; 3], [0.0; 3], 0)], Stage::Refined).unwrap();
        let dense = CorrespondenceSet::new(
            vec![pair([1.0, 0.0, 0.0], [0.0, 1.2, 0.0], 0)],
            Stage::DenseLoose,
        )
        .unwrap();
        let s = sparse_to_dense_consistency(&priors, &dense, 0.1).unwrap();
        assert_eq!(s.get(0, 0), 0.0);
        // identical pair: distance 0
        let same =
            CorrespondenceSet::new(vec![pair([0.0; 3], [0.0; 3], 0)], Stage::DenseLoose).unwrap();
        assert_eq!(
            sparse_to_dense_consistency(&priors, &same, 0.1)
                .unwrap()
                .get(0, 0),
            1.0
        );
    }

    #[test]
    fn empty_priors_signal_sparse_failure() {
        let dense =
            CorrespondenceSet::new(vec![pair([0.0; 3], [0.0; 3], 0)], Stage::DenseLoose).unwrap();
        let err =
            sparse_to_dense_consistency(&CorrespondenceSet::empty(Stage::Refined), &dense, 0.1);
        assert!(matches!(err, Err(Error::Empty(_))));
    }

    #[test]
    fn copies_of_a_single_prior_form_one_uniform_group() {
        let p = [0.3, -0.2, 1.0];
        let q = [2.0, 0.5, 0.0];
        let priors = CorrespondenceSet::new(vec![pair(p, q, 0)], Stage::Refined).unwrap();
        let dense = CorrespondenceSet::new(
            (0..5)
                .map(|i| Correspondence::new(i, i, Point3::from(p), Point3::from(q), 1.0))
                .collect(),
            Stage::DenseLoose,
        )
        .unwrap();
        let groups = prior_guided_group_select(&priors, &dense, 0.1, DEFAULT_K_GROUP).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups.groups[0].members.len(), 5);
        assert!(groups.groups[0]
            .weights
            .iter()
            .all(|&w| w == groups.groups[0].weights[0] && w > 0.0));
    }

    #[test]
    fn no_consistent_rows_is_an_error() {
        let priors =
            CorrespondenceSet::new(vec![pair([0.0; 3], [0.0; 3], 0)], Stage::Refined).unwrap();
        let dense = CorrespondenceSet::new(
            vec![pair([1.0, 0.0, 0.0], [0.0, 5.0, 0.0], 0)],
            Stage::DenseLoose,
        )
        .unwrap();
        assert!(prior_guided_group_select(&priors, &dense, 0.1, 10).is_err());
    }
}
