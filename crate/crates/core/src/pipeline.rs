//! End-to-end registration: features, sparse matching, dense matching,
//! per-group weighted SVD and hypothesis selection.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::descriptor::{extract_with_radius, DescriptorConfig, FeatureSet};
use crate::error::{Error, Result};
use crate::geom::{PointCloud, RigidTransform};
use crate::matching::dense::{
    dense_loose_generate, prior_guided_group_select, DenseGroupSet, DEFAULT_K_GROUP,
};
use crate::matching::sparse::{one_to_many_generate, second_order_filter, spectral_key_selection};
use crate::matching::{CorrespondenceSet, MatchConfig, Stage};
use crate::pose::{hypothesis_select, weighted_svd, Hypothesis};

/// Stage toggles used by the ablation runner; all `true` is the full pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationSwitches {
    /// `false` forces `k_loose = 1` (one-to-one generation).
    pub loose_generation: bool,
    /// `false` skips the second-order filter; the loose set is used as priors.
    pub strict_selection: bool,
    /// `false` skips dense matching and solves once on the refined sparse set.
    pub two_stage: bool,
}

impl Default for AblationSwitches {
    fn default() -> Self {
        Self {
            loose_generation: true,
            strict_selection: true,
            two_stage: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationConfig {
    pub descriptor: DescriptorConfig,
    pub matching: MatchConfig,
    /// Maximum members per dense group.
    pub k_group: usize,
    /// Hypothesis-selection distance threshold in meters.
    pub tau0: f64,
    pub ablation: AblationSwitches,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            descriptor: DescriptorConfig::default(),
            matching: MatchConfig::default(),
            k_group: DEFAULT_K_GROUP,
            tau0: 0.1,
            ablation: AblationSwitches::default(),
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        self.descriptor.validate()?;
        self.matching.validate()?;
        if self.k_group == 0 {
            return Err(Error::InvalidArgument("k_group must be >= 1".into()));
        }
        if !(self.tau0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tau0 must be > 0, got {}",
                self.tau0
            )));
        }
        Ok(())
    }

    pub fn effective_k_loose(&self) -> usize {
        if self.ablation.loose_generation {
            self.matching.k_loose
        } else {
            1
        }
    }
}

/// Correspondence counts per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageCounts {
    pub sparse_source: usize,
    pub sparse_target: usize,
    pub dense_source: usize,
    pub dense_target: usize,
    pub loose: usize,
    pub keys: usize,
    pub refined: usize,
    pub dense_loose: usize,
    pub groups: usize,
    pub dense_selected: usize,
    pub hypotheses: usize,
}

/// Wall time per stage in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub features_ms: f64,
    pub sparse_ms: f64,
    pub dense_ms: f64,
    pub pose_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub transform: RigidTransform,
    pub inlier_count: usize,
    pub best: Hypothesis,
    pub hypotheses: Vec<Hypothesis>,
    pub source_features: FeatureSet,
    pub target_features: FeatureSet,
    pub loose: CorrespondenceSet,
    pub keys: CorrespondenceSet,
    pub refined: CorrespondenceSet,
    pub dense_loose: CorrespondenceSet,
    pub groups: DenseGroupSet,
    pub counts: StageCounts,
    pub timings: StageTimings,
}

impl RegistrationResult {
    /// Correspondences the final transforms were estimated from.
    pub fn final_correspondences(&self) -> CorrespondenceSet {
        if self.groups.is_empty() {
            self.refined.clone()
        } else {
            self.groups.union()
        }
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Register `src` onto `dst`: the returned transform maps source points into the target frame.
pub fn register(
    src: &PointCloud,
    dst: &PointCloud,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    let start = Instant::now();
    let radius = cfg
        .descriptor
        .resolve_radius(&[src, dst])
        .map_err(|e| e.at("features"))?;
    let sf = extract_with_radius(src, &cfg.descriptor, radius).map_err(|e| e.at("features"))?;
    let tf = extract_with_radius(dst, &cfg.descriptor, radius).map_err(|e| e.at("features"))?;
    let features_ms = ms(start);

    let t = Instant::now();
    let (loose, keys, refined) =
        sparse_stage(&sf, &tf, cfg).map_err(|e| e.at("sparse matching"))?;
    let sparse_ms = ms(t);

    let t = Instant::now();
    let (dense_loose, groups) = if cfg.ablation.two_stage {
        let dense_loose = dense_loose_generate(
            &sf.dense_features,
            &tf.dense_features,
            &sf.dense_points,
            &tf.dense_points,
            cfg.effective_k_loose().min(tf.dense_points.len()),
        )
        .map_err(|e| e.at("dense matching"))?;
        let groups =
            prior_guided_group_select(&refined, &dense_loose, cfg.matching.sigma_d, cfg.k_group)
                .map_err(|e| e.at("dense matching"))?;
        (dense_loose, groups)
    } else {
        (
            CorrespondenceSet::empty(Stage::DenseLoose),
            DenseGroupSet::default(),
        )
    };
    let dense_ms = ms(t);

    let t = Instant::now();
    let mut hypotheses = Vec::new();
    if cfg.ablation.two_stage {
        for (gid, g) in groups.groups.iter().enumerate() {
            // degenerate groups are skipped
            if let Ok(tr) = weighted_svd(g.members.items(), &g.weights) {
                hypotheses.push(hypothesis(tr, gid, g.members.items(), &g.weights));
            }
        }
    } else {
        let weights: Vec<f64> = refined.iter().map(|c| c.score).collect();
        if let Ok(tr) = weighted_svd(refined.items(), &weights) {
            hypotheses.push(hypothesis(tr, 0, refined.items(), &weights));
        }
    }
    if hypotheses.is_empty() {
        return Err(
            Error::Degenerate("every correspondence group was degenerate".into()).at("pose"),
        );
    }
    let candidates: Vec<RigidTransform> = hypotheses.iter().map(|h| h.transform).collect();
    let (best_idx, counts) =
        hypothesis_select(&candidates, &sf.sparse_points, &tf.sparse_points, cfg.tau0)
            .map_err(|e| e.at("pose"))?;
    for (h, c) in hypotheses.iter_mut().zip(&counts) {
        h.inlier_count = *c;
    }
    let best = hypotheses[best_idx].clone();
    let pose_ms = ms(t);

    let counts = StageCounts {
        sparse_source: sf.sparse_points.len(),
        sparse_target: tf.sparse_points.len(),
        dense_source: sf.dense_points.len(),
        dense_target: tf.dense_points.len(),
        loose: loose.len(),
        keys: keys.len(),
        refined: refined.len(),
        dense_loose: dense_loose.len(),
        groups: groups.len(),
        dense_selected: groups.total_members(),
        hypotheses: hypotheses.len(),
    };
    Ok(RegistrationResult {
        transform: best.transform,
        inlier_count: best.inlier_count,
        best,
        hypotheses,
        source_features: sf,
        target_features: tf,
        loose,
        keys,
        refined,
        dense_loose,
        groups,
        counts,
        timings: StageTimings {
            features_ms,
            sparse_ms,
            dense_ms,
            pose_ms,
            total_ms: ms(start),
        },
    })
}

fn hypothesis(
    transform: RigidTransform,
    group_id: usize,
    members: &[crate::matching::Correspondence],
    weights: &[f64],
) -> Hypothesis {
    let total: f64 = weights.iter().sum();
    let mean_residual = members
        .iter()
        .zip(weights)
        .map(|(c, w)| w * c.residual(&transform))
        .sum::<f64>()
        / total;
    Hypothesis {
        transform,
        group_id,
        inlier_count: 0,
        mean_residual,
    }
}

/// Loose generation, spectral screening and second-order refinement.
pub fn sparse_stage(
    sf: &FeatureSet,
    tf: &FeatureSet,
    cfg: &RegistrationConfig,
) -> Result<(CorrespondenceSet, CorrespondenceSet, CorrespondenceSet)> {
    let m = &cfg.matching;
    let k = cfg.effective_k_loose().min(tf.sparse_points.len());
    let loose = one_to_many_generate(
        &sf.sparse_features,
        &tf.sparse_features,
        &sf.sparse_points,
        &tf.sparse_points,
        k,
    )?;
    let selection =
        spectral_key_selection(&loose, m.sigma_d, m.n_keys, m.power_tol, m.power_max_iters)?;
    let refined = if cfg.ablation.strict_selection {
        second_order_filter(&selection.keys, &loose, m.sigma_d, m.k_refine)?
    } else {
        loose.clone().with_stage(Stage::Refined)
    };
    if refined.is_empty() {
        return Err(Error::Empty("refined sparse correspondences"));
    }
    Ok((loose, selection.keys, refined))
}
