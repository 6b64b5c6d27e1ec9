//! Synthetic benchmark scenes, metrics and the ablation runner.

pub mod metrics;
pub mod runner;
pub mod scene;

pub use metrics::{
    feature_matching_recall, inlier_ratio, inlier_ratio_at, pose_errors, registration_recall,
    PoseError, FMR_THRESHOLD, INLIER_THRESHOLD, RR_ROTATION_DEG, RR_TRANSLATION_M,
};
pub use runner::{
    ablation_variants, evaluate_scene, run_ablation, run_benchmark, AblationReport, AblationRow,
    BenchmarkReport, SceneReport, Suite,
};
pub use scene::{generate_scene, scene_diameter, voxel_for_ratio, BenchmarkScene, SceneParams};
