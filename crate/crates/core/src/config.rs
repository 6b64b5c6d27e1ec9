//! Flat `key = value` configuration files and JSON result reports.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the field
//! names of [`DescriptorConfig`](crate::descriptor::DescriptorConfig),
//! [`MatchConfig`](crate::matching::MatchConfig) and the pipeline-level
//! settings; an unknown key is an error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{RegistrationConfig, RegistrationResult, StageCounts, StageTimings};

/// Parsed `key = value` pairs in file order, with their line numbers.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse(format!(
                "line {}: expected `key = value`",
                n + 1
            )));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", n + 1)));
        }
        out.push((n + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub(crate) fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad value `{v}` for `{key}`")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Parse(format!(
            "line {line}: bad boolean `{v}` for `{key}`"
        ))),
    }
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| parse_value(line, key, s.trim()))
        .collect()
}

/// Apply one key to `cfg`.
pub fn set_key(cfg: &mut RegistrationConfig, line: usize, key: &str, v: &str) -> Result<()> {
    let d = &mut cfg.descriptor;
    let m = &mut cfg.matching;
    match key {
        "dims" => d.dims = parse_value(line, key, v)?,
        "support_radius" => {
            d.support_radius = if v == "auto" {
                None
            } else {
                Some(parse_value(line, key, v)?)
            }
        }
        "radius_factor" => d.radius_factor = parse_value(line, key, v)?,
        "pyramid_ratios" => d.pyramid_ratios = parse_list(line, key, v)?,
        "down_fraction" => d.down_fraction = parse_value(line, key, v)?,
        "up_neighbors" => d.up_neighbors = parse_value(line, key, v)?,
        "multi_density" => d.multi_density = parse_bool(line, key, v)?,
        "density_gate" => d.density_gate = parse_value(line, key, v)?,
        "k_loose" => m.k_loose = parse_value(line, key, v)?,
        "n_keys" => m.n_keys = parse_value(line, key, v)?,
        "k_refine" => m.k_refine = parse_value(line, key, v)?,
        "sigma_d" => m.sigma_d = parse_value(line, key, v)?,
        "power_tol" => m.power_tol = parse_value(line, key, v)?,
        "power_max_iters" => m.power_max_iters = parse_value(line, key, v)?,
        "k_group" => cfg.k_group = parse_value(line, key, v)?,
        "tau0" => cfg.tau0 = parse_value(line, key, v)?,
        "loose_generation" => cfg.ablation.loose_generation = parse_bool(line, key, v)?,
        "strict_selection" => cfg.ablation.strict_selection = parse_bool(line, key, v)?,
        "two_stage" => cfg.ablation.two_stage = parse_bool(line, key, v)?,
        _ => {
            return Err(Error::UnknownKey {
                line,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

/// Defaults overridden by every key in `text`, validated.
pub fn parse_config(text: &str) -> Result<RegistrationConfig> {
    let mut cfg = RegistrationConfig::default();
    for (line, k, v) in parse_key_values(text)? {
        set_key(&mut cfg, line, &k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RegistrationConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// The configuration as a config file that parses back to the same value.
pub fn to_config_text(cfg: &RegistrationConfig) -> String {
    let d = &cfg.descriptor;
    let m = &cfg.matching;
    let ratios: Vec<String> = d.pyramid_ratios.iter().map(f64::to_string).collect();
    let radius = d
        .support_radius
        .map_or("auto".to_string(), |r| r.to_string());
    let rows = [
        ("dims", d.dims.to_string()),
        ("support_radius", radius),
        ("radius_factor", d.radius_factor.to_string()),
        ("pyramid_ratios", ratios.join(",")),
        ("down_fraction", d.down_fraction.to_string()),
        ("up_neighbors", d.up_neighbors.to_string()),
        ("multi_density", d.multi_density.to_string()),
        ("density_gate", d.density_gate.to_string()),
        ("k_loose", m.k_loose.to_string()),
        ("n_keys", m.n_keys.to_string()),
        ("k_refine", m.k_refine.to_string()),
        ("sigma_d", m.sigma_d.to_string()),
        ("power_tol", m.power_tol.to_string()),
        ("power_max_iters", m.power_max_iters.to_string()),
        ("k_group", cfg.k_group.to_string()),
        ("tau0", cfg.tau0.to_string()),
        (
            "loose_generation",
            cfg.ablation.loose_generation.to_string(),
        ),
        (
            "strict_selection",
            cfg.ablation.strict_selection.to_string(),
        ),
        ("two_stage", cfg.ablation.two_stage.to_string()),
    ];
    rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Serializable summary of one registration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationReport {
    /// Row-major 3x3 rotation.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub inlier_count: usize,
    pub counts: StageCounts,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<StageTimings>,
}

impl RegistrationReport {
    /// Timings are wall-clock and vary between runs, so they are opt-in.
    pub fn from_result(r: &RegistrationResult, with_timings: bool) -> Self {
        let t = r.transform.translation();
        Self {
            rotation: r.transform.rotation_row_major(),
            translation: [t.x, t.y, t.z],
            inlier_count: r.inlier_count,
            counts: r.counts,
            timings: with_timings.then_some(r.timings),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
