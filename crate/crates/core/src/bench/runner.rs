//! Benchmark suites and the ablation runner.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{
    feature_matching_recall, inlier_ratio, pose_errors, registration_recall, PoseError,
    RR_ROTATION_DEG, RR_TRANSLATION_M,
};
use super::scene::{generate_scene, BenchmarkScene, SceneParams};
use crate::config::{parse_key_values, parse_value, set_key};
use crate::error::{Error, Result};
use crate::pipeline::{register, AblationSwitches, RegistrationConfig};

/// Scenes `seed, seed + 1, ..` generated with one parameter set, plus the
/// pipeline configuration and success thresholds to evaluate them with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub scenes: usize,
    pub seed: u64,
    pub params: SceneParams,
    pub config: RegistrationConfig,
    pub max_rotation_deg: f64,
    pub max_translation: f64,
}

impl Default for Suite {
    fn default() -> Self {
        Self {
            scenes: 10,
            seed: 0,
            params: SceneParams::default(),
            config: RegistrationConfig::default(),
            max_rotation_deg: RR_ROTATION_DEG,
            max_translation: RR_TRANSLATION_M,
        }
    }
}

impl Suite {
    /// Parse a suite file: scene keys (`scenes`, `seed`, `base_points`,
    /// `density_ratio`, `noise`, `outliers`, `overlap`, `max_rotation_deg`,
    /// `max_translation`) and any registration config key.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Suite::default();
        for (line, k, v) in parse_key_values(text)? {
            match k.as_str() {
                "scenes" => s.scenes = parse_value(line, &k, &v)?,
                "seed" => s.seed = parse_value(line, &k, &v)?,
                "base_points" => s.params.base_points = parse_value(line, &k, &v)?,
                "density_ratio" => s.params.density_ratio = parse_value(line, &k, &v)?,
                "noise" => s.params.noise = parse_value(line, &k, &v)?,
                "outliers" => s.params.outlier_fraction = parse_value(line, &k, &v)?,
                "overlap" => s.params.overlap = parse_value(line, &k, &v)?,
                "max_rotation_deg" => s.max_rotation_deg = parse_value(line, &k, &v)?,
                "max_translation" => s.max_translation = parse_value(line, &k, &v)?,
                _ => set_key(&mut s.config, line, &k, &v)?,
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 {
            return Err(Error::InvalidArgument(
                "suite needs at least one scene".into(),
            ));
        }
        self.params.validate()?;
        self.config.validate()
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.scenes as u64).map(|i| self.seed + i)
    }
}

/// Outcome of registering one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub seed: u64,
    /// `None` when registration failed.
    pub error: Option<PoseError>,
    pub failure: Option<String>,
    pub loose_ir: f64,
    pub refined_ir: f64,
    /// Inlier ratio of the correspondences the transform was solved from.
    pub final_ir: f64,
    /// Ground-truth inliers among the spectral keys.
    pub key_inliers: usize,
    pub success: bool,
}

/// Register one generated scene and score it against its ground truth.
pub fn evaluate_scene(
    scene: &BenchmarkScene,
    cfg: &RegistrationConfig,
    max_rotation_deg: f64,
    max_translation: f64,
) -> SceneReport {
    let gt = &scene.ground_truth;
    match register(&scene.source, &scene.target, cfg) {
        Ok(r) => {
            let error = pose_errors(&r.transform, gt);
            SceneReport {
                seed: scene.seed,
                error: Some(error),
                failure: None,
                loose_ir: inlier_ratio(r.loose.items(), gt),
                refined_ir: inlier_ratio(r.refined.items(), gt),
                final_ir: inlier_ratio(r.final_correspondences().items(), gt),
                key_inliers: r
                    .keys
                    .iter()
                    .filter(|c| c.residual(gt) < super::INLIER_THRESHOLD)
                    .count(),
                success: error.succeeds(max_rotation_deg, max_translation),
            }
        }
        Err(e) => SceneReport {
            seed: scene.seed,
            error: None,
            failure: Some(e.to_string()),
            loose_ir: 0.0,
            refined_ir: 0.0,
            final_ir: 0.0,
            key_inliers: 0,
            success: false,
        },
    }
}

/// Per-scene reports plus aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub scenes: Vec<SceneReport>,
    pub registration_recall: f64,
    pub feature_matching_recall: f64,
    pub mean_inlier_ratio: f64,
    /// Means over successful scenes; 0 when none succeeded.
    pub mean_rotation_deg: f64,
    pub mean_translation: f64,
}

impl BenchmarkReport {
    pub fn from_scenes(
        scenes: Vec<SceneReport>,
        max_rotation_deg: f64,
        max_translation: f64,
    ) -> Result<Self> {
        if scenes.is_empty() {
            return Err(Error::Empty("benchmark scenes"));
        }
        let irs: Vec<f64> = scenes.iter().map(|s| s.final_ir).collect();
        // a failed registration counts as an unbounded pose error
        let errors: Vec<PoseError> = scenes
            .iter()
            .map(|s| {
                s.error.unwrap_or(PoseError {
                    rotation_deg: 180.0,
                    translation: f64::INFINITY,
                })
            })
            .collect();
        let ok: Vec<&PoseError> = scenes
            .iter()
            .filter(|s| s.success)
            .filter_map(|s| s.error.as_ref())
            .collect();
        let mean = |f: fn(&PoseError) -> f64| {
            if ok.is_empty() {
                0.0
            } else {
                ok.iter().map(|e| f(e)).sum::<f64>() / ok.len() as f64
            }
        };
        Ok(Self {
            registration_recall: registration_recall(&errors, max_rotation_deg, max_translation)?,
            feature_matching_recall: feature_matching_recall(&irs)?,
            mean_inlier_ratio: irs.iter().sum::<f64>() / irs.len() as f64,
            mean_rotation_deg: mean(|e| e.rotation_deg),
            mean_translation: mean(|e| e.translation),
            scenes,
        })
    }
}

/// Register every scene of the suite; reports are in seed order.
pub fn run_benchmark(suite: &Suite) -> Result<BenchmarkReport> {
    run_with_config(suite, &suite.config)
}

fn run_with_config(suite: &Suite, cfg: &RegistrationConfig) -> Result<BenchmarkReport> {
    suite.validate()?;
    let seeds: Vec<u64> = suite.seeds().collect();
    let scenes: Vec<SceneReport> = seeds
        .par_iter()
        .map(|&seed| {
            let scene = generate_scene(&suite.params, seed)?;
            Ok(evaluate_scene(
                &scene,
                cfg,
                suite.max_rotation_deg,
                suite.max_translation,
            ))
        })
        .collect::<Result<_>>()?;
    BenchmarkReport::from_scenes(scenes, suite.max_rotation_deg, suite.max_translation)
}

/// The four pipeline variants compared by the ablation runner.
pub fn ablation_variants() -> Vec<(&'static str, AblationSwitches)> {
    let full = AblationSwitches::default();
    vec![
        ("full", full),
        (
            "no_loose_generation",
            AblationSwitches {
                loose_generation: false,
                ..full
            },
        ),
        (
            "no_strict_selection",
            AblationSwitches {
                strict_selection: false,
                ..full
            },
        ),
        (
            "one_stage",
            AblationSwitches {
                two_stage: false,
                ..full
            },
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub switches: AblationSwitches,
    pub report: BenchmarkReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// `variant,registration_recall,mean_inlier_ratio,feature_matching_recall,mean_rotation_deg,mean_translation,scenes`
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "variant,registration_recall,mean_inlier_ratio,feature_matching_recall,mean_rotation_deg,mean_translation,scenes"
        )?;
        for r in &self.rows {
            let b = &r.report;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.variant,
                b.registration_recall,
                b.mean_inlier_ratio,
                b.feature_matching_recall,
                b.mean_rotation_deg,
                b.mean_translation,
                b.scenes.len()
            )?;
        }
        Ok(())
    }
}

/// Run `variants` over the identical scenes of `suite`, starting from the
/// suite's own configuration.
pub fn run_ablation(
    suite: &Suite,
    variants: &[(&str, AblationSwitches)],
) -> Result<AblationReport> {
    let rows = variants
        .iter()
        .map(|&(name, switches)| {
            let cfg = RegistrationConfig {
                ablation: switches,
                ..suite.config.clone()
            };
            Ok(AblationRow {
                variant: name.to_string(),
                switches,
                report: run_with_config(suite, &cfg)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AblationReport { rows })
}
