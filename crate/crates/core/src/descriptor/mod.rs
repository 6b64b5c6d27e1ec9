//! Density-robust feature extraction.
//!
//! Each pyramid level is described three times at different densities
//! (an FPS-thinned copy, the level itself with one smoothing pass, and a
//! midpoint-upsampled copy) and the three results are averaged. Features
//! of a level are carried to the next, coarser level, and the sparsest
//! level's features are interpolated back onto the dense level.

mod local;
mod pyramid;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use local::{
    eigen_features, layout, local_geometry_descriptor, uniform_row, LocalDescriptor, MIN_NEIGHBORS,
};
pub use pyramid::{
    build_density_pyramid, level_sizes, DensityPyramid, PyramidLevel, MIN_LEVEL_POINTS,
};

use crate::error::{Error, Result};
use crate::features::{normalize, FeatureMatrix};
use crate::geom::interp::interpolate_with_index;
use crate::geom::{farthest_point_sample, median_nn_spacing, Point3, PointCloud, SpatialIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorConfig {
    /// Row dimensionality `d`.
    pub dims: usize,
    /// Level-0 support radius in meters; `None` derives it from point spacing.
    pub support_radius: Option<f64>,
    /// Automatic radius = `radius_factor` x median nearest-neighbor spacing.
    pub radius_factor: f64,
    /// Level sizes as fractions of the input, strictly decreasing.
    pub pyramid_ratios: Vec<f64>,
    /// Fraction of points kept by the FPS branch.
    pub down_fraction: f64,
    /// Midpoints added per point by the upsampling branch.
    pub up_neighbors: usize,
    /// `false` replaces the three fused branches by the plain descriptor.
    pub multi_density: bool,
    /// Points whose neighbor count within the support radius is below this
    /// fraction of the cloud's median count are dropped before the pyramid
    /// is built; 0 keeps every point.
    pub density_gate: f64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            dims: 32,
            support_radius: None,
            radius_factor: 4.0,
            pyramid_ratios: vec![1.0, 0.5, 0.25, 0.125],
            down_fraction: 0.5,
            up_neighbors: 2,
            multi_density: true,
            density_gate: 0.25,
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.dims < 8 {
            return bad(format!("dims must be >= 8, got {}", self.dims));
        }
        if let Some(r) = self.support_radius {
            if !(r > 0.0) || !r.is_finite() {
                return bad(format!("support_radius must be > 0, got {r}"));
            }
        }
        if !(self.radius_factor > 0.0) {
            return bad(format!(
                "radius_factor must be > 0, got {}",
                self.radius_factor
            ));
        }
        if self.pyramid_ratios.len() < 2 {
            return bad("pyramid_ratios needs at least two levels".into());
        }
        if self.pyramid_ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return bad("pyramid_ratios must lie in (0, 1]".into());
        }
        if self.pyramid_ratios.windows(2).any(|w| w[1] >= w[0]) {
            return bad("pyramid_ratios must be strictly decreasing".into());
        }
        if !(self.down_fraction > 0.0 && self.down_fraction < 1.0) {
            return bad(format!(
                "down_fraction must lie in (0, 1), got {}",
                self.down_fraction
            ));
        }
        if self.up_neighbors == 0 {
            return bad("up_neighbors must be >= 1".into());
        }
        if !(self.density_gate >= 0.0 && self.density_gate < 1.0) {
            return bad(format!(
                "density_gate must lie in [0, 1), got {}",
                self.density_gate
            ));
        }
        Ok(())
    }

    /// Index of the dense level within the pyramid.
    pub fn dense_level(&self) -> usize {
        1
    }

    /// Index of the sparse level within the pyramid.
    pub fn sparse_level(&self) -> usize {
        self.pyramid_ratios.len() - 1
    }

    /// Support radius at pyramid level `l`, growing so that the expected
    /// neighbor count on a surface stays constant as the level thins out.
    pub fn level_radius(&self, base: f64, level: usize) -> f64 {
        base * (self.pyramid_ratios[0] / self.pyramid_ratios[level]).sqrt()
    }

    /// Explicit radius, or `radius_factor` x the largest median spacing among `clouds`.
    pub fn resolve_radius(&self, clouds: &[&PointCloud]) -> Result<f64> {
        if let Some(r) = self.support_radius {
            return Ok(r);
        }
        let spacing = clouds
            .iter()
            .map(|c| median_nn_spacing(c, &SpatialIndex::build(c)))
            .fold(0.0, f64::max);
        if !(spacing > 0.0) {
            return Err(Error::Degenerate(
                "cannot derive a support radius: zero point spacing".into(),
            ));
        }
        Ok(self.radius_factor * spacing)
    }
}

/// Indices of the points whose neighbor count within `radius` reaches
/// `fraction` of the median count, in input order.
pub fn density_gate(
    cloud: &PointCloud,
    index: &SpatialIndex,
    radius: f64,
    fraction: f64,
) -> Vec<usize> {
    if fraction <= 0.0 || cloud.is_empty() {
        return (0..cloud.len()).collect();
    }
    let counts: Vec<usize> = cloud
        .iter()
        .map(|p| index.count_within(p, radius))
        .collect();
    let mut sorted = counts.clone();
    sorted.sort_unstable();
    let floor = fraction * sorted[sorted.len() / 2] as f64;
    (0..cloud.len())
        .filter(|&i| counts[i] as f64 >= floor)
        .collect()
}

/// Plain single-density descriptor of every point of `centers`, with
/// neighborhoods taken from `index`. Returns rows and weak flags.
pub fn descriptor_matrix(
    index: &SpatialIndex,
    centers: &PointCloud,
    radius: f64,
    dims: usize,
) -> (FeatureMatrix, Vec<bool>) {
    let mut out = FeatureMatrix::zeros(centers.len(), dims);
    let mut weak = Vec::with_capacity(centers.len());
    for (i, c) in centers.iter().enumerate() {
        let d = local_geometry_descriptor(index, c, radius, dims);
        out.row_mut(i).copy_from_slice(&d.row);
        weak.push(d.weak);
    }
    (out, weak)
}

/// Average every row with the rows of its `radius` neighbors, then renormalize.
pub fn smooth_features(index: &SpatialIndex, feats: &FeatureMatrix, radius: f64) -> FeatureMatrix {
    let dims = feats.dims();
    let mut out = FeatureMatrix::zeros(feats.rows(), dims);
    for (i, p) in index.points().iter().enumerate() {
        let row = out.row_mut(i);
        let nb = index.radius_unsorted(p, radius);
        for &(j, _) in &nb {
            for (o, v) in row.iter_mut().zip(feats.row(j)) {
                *o += v;
            }
        }
        if nb.is_empty() {
            row.copy_from_slice(feats.row(i));
        }
        let n = nb.len().max(1) as f64;
        row.iter_mut().for_each(|v| *v /= n);
        normalize(row);
    }
    out
}

/// Each point plus the midpoints to its `k` nearest neighbors (shared
/// midpoints emitted once). The first `|cloud|` points are the input.
pub fn upsample_midpoints(cloud: &PointCloud, index: &SpatialIndex, k: usize) -> PointCloud {
    let mut pairs = BTreeSet::new();
    for (i, p) in cloud.iter().enumerate() {
        if let Ok(nn) = index.knn(p, k + 1) {
            for &(j, _) in nn.iter().filter(|(j, _)| *j != i).take(k) {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    let mut pts = cloud.points().to_vec();
    pts.extend(pairs.into_iter().map(|(a, b)| {
        let (pa, pb) = (cloud[a], cloud[b]);
        Point3::from((pa.coords + pb.coords) * 0.5)
    }));
    PointCloud::new(pts).expect("midpoints of finite points are finite")
}

/// Clouds that descriptor neighborhoods are drawn from: the gated input and,
/// for the density branches, its FPS-thinned and midpoint-upsampled copies.
#[derive(Debug, Clone)]
pub struct SupportClouds {
    pub base: SpatialIndex,
    pub thin: Option<SpatialIndex>,
    pub up: Option<SpatialIndex>,
}

impl SupportClouds {
    pub fn new(base: &PointCloud, cfg: &DescriptorConfig) -> Result<Self> {
        if base.is_empty() {
            return Err(Error::Empty("descriptor support cloud"));
        }
        let index = SpatialIndex::build(base);
        let (thin, up) = if cfg.multi_density {
            let m = ((base.len() as f64 * cfg.down_fraction).ceil() as usize).clamp(1, base.len());
            let thin = base.select(&farthest_point_sample(base, m)?);
            let up = upsample_midpoints(base, &index, cfg.up_neighbors);
            (
                Some(SpatialIndex::build(&thin)),
                Some(SpatialIndex::build(&up)),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            base: index,
            thin,
            up,
        })
    }
}

/// The three density branches of one level, each `n x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityBranches {
    /// Described against the thinned support at an FPS subset of the centers, interpolated back.
    pub down: FeatureMatrix,
    /// Plain descriptor averaged over each center's neighbors.
    pub same: FeatureMatrix,
    /// Described against the upsampled support.
    pub up: FeatureMatrix,
}

/// Compute the three density branches at `centers`, whose plain descriptor is `plain`.
pub fn multi_density_branches(
    centers: &PointCloud,
    plain: &FeatureMatrix,
    support: &SupportClouds,
    radius: f64,
    cfg: &DescriptorConfig,
) -> Result<DensityBranches> {
    if centers.len() != plain.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} points but {} feature rows",
            centers.len(),
            plain.rows()
        )));
    }
    if centers.is_empty() {
        return Err(Error::Empty("density branch input"));
    }
    let (Some(thin_support), Some(up_support)) = (&support.thin, &support.up) else {
        return Err(Error::InvalidArgument(
            "support clouds were built without density branches".into(),
        ));
    };
    let dims = plain.dims();
    let index = SpatialIndex::build(centers);

    let m = ((centers.len() as f64 * cfg.down_fraction).ceil() as usize).clamp(1, centers.len());
    let thin = centers.select(&farthest_point_sample(centers, m)?);
    let (thin_feats, _) = descriptor_matrix(thin_support, &thin, radius, dims);
    let down =
        interpolate_with_index(&SpatialIndex::build(&thin), &thin_feats, centers)?.normalized();

    let same = smooth_features(&index, plain, radius);

    let (up, _) = descriptor_matrix(up_support, centers, radius, dims);

    Ok(DensityBranches { down, same, up })
}

/// Equal-weight average of the three branches, row-normalized.
pub fn fuse_multi_density(
    down: &FeatureMatrix,
    same: &FeatureMatrix,
    up: &FeatureMatrix,
) -> Result<FeatureMatrix> {
    if down.shape() != same.shape() || down.shape() != up.shape() {
        return Err(Error::ShapeMismatch(format!(
            "branch shapes {:?}, {:?}, {:?}",
            down.shape(),
            same.shape(),
            up.shape()
        )));
    }
    let (rows, dims) = down.shape();
    let third = 1.0 / 3.0;
    let data = down
        .as_slice()
        .iter()
        .zip(same.as_slice())
        .zip(up.as_slice())
        .map(|((a, b), c)| third * a + third * b + third * c)
        .collect();
    Ok(FeatureMatrix::from_vec(rows, dims, data)?.normalized())
}

/// Sparse- and dense-level points with their features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub sparse_points: PointCloud,
    pub sparse_features: FeatureMatrix,
    /// Input-cloud index of every sparse point.
    pub sparse_source: Vec<usize>,
    pub dense_points: PointCloud,
    pub dense_features: FeatureMatrix,
    pub dense_source: Vec<usize>,
    /// Level-0 support radius that was used.
    pub radius: f64,
}

/// Run the full extractor with an explicit or automatic support radius.
pub fn extract_density_robust_features(
    cloud: &PointCloud,
    cfg: &DescriptorConfig,
) -> Result<FeatureSet> {
    cfg.validate()?;
    let radius = cfg.resolve_radius(&[cloud])?;
    extract_with_radius(cloud, cfg, radius)
}

/// Add `extra` to every row of `feats` and renormalize.
fn accumulate(feats: &mut FeatureMatrix, extra: &FeatureMatrix) {
    for i in 0..feats.rows() {
        let row = feats.row_mut(i);
        for (v, c) in row.iter_mut().zip(extra.row(i)) {
            *v += c;
        }
        normalize(row);
    }
}

pub fn extract_with_radius(
    cloud: &PointCloud,
    cfg: &DescriptorConfig,
    radius: f64,
) -> Result<FeatureSet> {
    cfg.validate()?;
    let kept = density_gate(cloud, &SpatialIndex::build(cloud), radius, cfg.density_gate);
    let gated = cloud.select(&kept);
    let pyramid = build_density_pyramid(&gated, &cfg.pyramid_ratios)?;
    let support = SupportClouds::new(&gated, cfg)?;
    let mut level_feats: Vec<FeatureMatrix> = Vec::with_capacity(pyramid.len());
    for (l, level) in pyramid.levels().iter().enumerate() {
        let r = cfg.level_radius(radius, l);
        let (plain, _) = descriptor_matrix(&support.base, &level.cloud, r, cfg.dims);
        let mut feats = if cfg.multi_density {
            let b = multi_density_branches(&level.cloud, &plain, &support, r, cfg)?;
            fuse_multi_density(&b.down, &b.same, &b.up)?
        } else {
            plain
        };
        if let Some(prev) = level_feats.last() {
            // carry the finer level's features onto the selected points
            accumulate(&mut feats, &prev.select(&level.parent));
        }
        level_feats.push(feats);
    }

    let sparse = pyramid.level(cfg.sparse_level());
    let dense = pyramid.level(cfg.dense_level());
    let sparse_features = level_feats[cfg.sparse_level()].clone();
    let decoded = interpolate_with_index(
        &SpatialIndex::build(&sparse.cloud),
        &sparse_features,
        &dense.cloud,
    )?;
    let mut dense_features = level_feats[cfg.dense_level()].clone();
    accumulate(&mut dense_features, &decoded);

    Ok(FeatureSet {
        sparse_points: sparse.cloud.clone(),
        sparse_features,
        sparse_source: sparse.root.iter().map(|&i| kept[i]).collect(),
        dense_points: dense.cloud.clone(),
        dense_features,
        dense_source: dense.root.iter().map(|&i| kept[i]).collect(),
        radius,
    })
}

fn write_indices<W: std::io::Write>(w: &mut W, idx: &[usize]) -> Result<()> {
    w.write_all(&(idx.len() as u64).to_le_bytes())?;
    for &i in idx {
        w.write_all(&(i as u64).to_le_bytes())?;
    }
    Ok(())
}

fn read_indices<R: std::io::Read>(r: &mut R) -> Result<Vec<usize>> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    let mut out = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        r.read_exact(&mut word)?;
        out.push(u64::from_le_bytes(word) as usize);
    }
    Ok(out)
}

impl FeatureSet {
    /// Cache layout: sparse input indices, sparse features, dense input
    /// indices, dense features, radius as f64. Index lists are a u64 count
    /// followed by u64 entries; feature blocks use the feature dump format.
    pub fn write_cache<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        write_indices(&mut w, &self.sparse_source)?;
        self.sparse_features.write_to(&mut w)?;
        write_indices(&mut w, &self.dense_source)?;
        self.dense_features.write_to(&mut w)?;
        w.write_all(&self.radius.to_le_bytes())?;
        Ok(())
    }

    /// Read a cache written for `cloud`; features come back at f32 precision.
    pub fn read_cache<R: std::io::Read>(mut r: R, cloud: &PointCloud) -> Result<Self> {
        let sparse_source = read_indices(&mut r)?;
        let sparse_features = FeatureMatrix::read_from(&mut r)?;
        let dense_source = read_indices(&mut r)?;
        let dense_features = FeatureMatrix::read_from(&mut r)?;
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        if sparse_source.len() != sparse_features.rows()
            || dense_source.len() != dense_features.rows()
        {
            return Err(Error::Parse(
                "feature cache index and row counts disagree".into(),
            ));
        }
        if sparse_source
            .iter()
            .chain(&dense_source)
            .any(|&i| i >= cloud.len())
        {
            return Err(Error::Parse(
                "feature cache refers to points outside the cloud".into(),
            ));
        }
        Ok(Self {
            sparse_points: cloud.select(&sparse_source),
            sparse_features,
            sparse_source,
            dense_points: cloud.select(&dense_source),
            dense_features,
            dense_source,
            radius: f64::from_le_bytes(word),
        })
    }
}
