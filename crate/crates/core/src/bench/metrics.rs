//! Registration metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::RigidTransform;
use crate::matching::Correspondence;

/// Residual threshold for a correspondence inlier, meters.
pub const INLIER_THRESHOLD: f64 = 0.1;
/// Inlier ratio a scene must exceed to count towards feature-matching recall.
pub const FMR_THRESHOLD: f64 = 0.05;
/// Default success thresholds for registration recall.
pub const RR_ROTATION_DEG: f64 = 15.0;
pub const RR_TRANSLATION_M: f64 = 0.30;

/// Fraction of correspondences with `||T_gt p - q|| < 0.1`; 0 for an empty set.
pub fn inlier_ratio(corrs: &[Correspondence], gt: &RigidTransform) -> f64 {
    inlier_ratio_at(corrs, gt, INLIER_THRESHOLD)
}

pub fn inlier_ratio_at(corrs: &[Correspondence], gt: &RigidTransform, threshold: f64) -> f64 {
    if corrs.is_empty() {
        log::warn!("inlier ratio of an empty correspondence set");
        return 0.0;
    }
    let hits = corrs.iter().filter(|c| c.residual(gt) < threshold).count();
    hits as f64 / corrs.len() as f64
}

/// Fraction of scenes whose inlier ratio exceeds 0.05.
pub fn feature_matching_recall(inlier_ratios: &[f64]) -> Result<f64> {
    if inlier_ratios.is_empty() {
        return Err(Error::Empty("feature matching recall over no scenes"));
    }
    let hits = inlier_ratios
        .iter()
        .filter(|&&ir| ir > FMR_THRESHOLD)
        .count();
    Ok(hits as f64 / inlier_ratios.len() as f64)
}

/// Rotation error in degrees and translation error in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub rotation_deg: f64,
    pub translation: f64,
}

pub fn pose_errors(estimate: &RigidTransform, gt: &RigidTransform) -> PoseError {
    let m = gt.rotation().transpose() * estimate.rotation();
    let cos = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    PoseError {
        rotation_deg: cos.acos().to_degrees(),
        translation: (estimate.translation() - gt.translation()).norm(),
    }
}

impl PoseError {
    pub fn succeeds(&self, max_rotation_deg: f64, max_translation: f64) -> bool {
        self.rotation_deg < max_rotation_deg && self.translation < max_translation
    }
}

/// Fraction of pose errors under both thresholds.
pub fn registration_recall(
    errors: &[PoseError],
    max_rotation_deg: f64,
    max_translation: f64,
) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("registration recall over no scenes"));
    }
    let hits = errors
        .iter()
        .filter(|e| e.succeeds(max_rotation_deg, max_translation))
        .count();
    Ok(hits as f64 / errors.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use nalgebra::Vector3;

    #[test]
    fn inlier_threshold_is_strict() {
        let id = RigidTransform::identity();
        let c = |d: f64| Correspondence::new(0, 0, Point3::origin(), Point3::new(d, 0.0, 0.0), 1.0);
        let corrs = [c(0.0), c(0.05), c(0.1), c(0.5)];
        assert_eq!(inlier_ratio(&corrs, &id), 0.5);
        assert_eq!(inlier_ratio(&[], &id), 0.0);
    }

    #[test]
    fn fmr_threshold_is_strict() {
        assert_eq!(
            feature_matching_recall(&[0.05, 0.051, 0.0, 1.0]).unwrap(),
            0.5
        );
        assert!(feature_matching_recall(&[]).is_err());
    }

    #[test]
    fn pose_error_of_known_rotation() {
        let gt = RigidTransform::identity();
        let est = RigidTransform::from_axis_angle(
            Vector3::x(),
            10f64.to_radians(),
            Vector3::new(0.0, 0.2, 0.0),
        );
        let e = pose_errors(&est, &gt);
        assert!((e.rotation_deg - 10.0).abs() < 1e-9);
        assert!((e.translation - 0.2).abs() < 1e-12);
        assert!(e.succeeds(RR_ROTATION_DEG, RR_TRANSLATION_M));
        let e = pose_errors(&gt, &gt);
        assert_eq!(e.rotation_deg, 0.0);
        assert_eq!(registration_recall(&[e], 15.0, 0.3).unwrap(), 1.0);
        assert!(registration_recall(&[], 15.0, 0.3).is_err());
    }
}
