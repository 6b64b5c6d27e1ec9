use crate::error::{Error, Result};
use crate::geom::{farthest_point_sample, PointCloud};

/// Minimum number of points every pyramid level must hold.
pub const MIN_LEVEL_POINTS: usize = 4;

/// One resolution level. `parent[i]` is the index of point `i` in the
/// previous (denser) level; level 0 maps to the input cloud itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevel {
    pub cloud: PointCloud,
    pub parent: Vec<usize>,
    /// Index of every point in the level-0 cloud.
    pub root: Vec<usize>,
}

/// Progressively farthest-point-sampled copies of a cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPyramid {
    levels: Vec<PyramidLevel>,
}

impl DensityPyramid {
    pub fn levels(&self) -> &[PyramidLevel] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &PyramidLevel {
        &self.levels[l]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Level sizes `ceil(n * ratio_k)`.
pub fn level_sizes(n: usize, ratios: &[f64]) -> Vec<usize> {
    ratios
        .iter()
        .map(|r| ((n as f64) * r - 1e-9).ceil().max(0.0) as usize)
        .collect()
}

/// Build the pyramid; level `k + 1` is an FPS selection of level `k`.
pub fn build_density_pyramid(cloud: &PointCloud, ratios: &[f64]) -> Result<DensityPyramid> {
    let sizes = level_sizes(cloud.len(), ratios);
    for (level, &size) in sizes.iter().enumerate() {
        if size < MIN_LEVEL_POINTS {
            return Err(Error::PyramidTooSmall {
                level,
                required: MIN_LEVEL_POINTS,
                actual: size,
            });
        }
    }
    let mut levels: Vec<PyramidLevel> = Vec::with_capacity(sizes.len());
    for (level, &size) in sizes.iter().enumerate() {
        let next = match levels.last() {
            None if size == cloud.len() => PyramidLevel {
                cloud: cloud.clone(),
                parent: (0..size).collect(),
                root: (0..size).collect(),
            },
            None => {
                let picks = farthest_point_sample(cloud, size)?;
                PyramidLevel {
                    cloud: cloud.select(&picks),
                    root: picks.clone(),
                    parent: picks,
                }
            }
            Some(prev) => {
                if size >= prev.cloud.len() {
                    return Err(Error::InvalidArgument(format!(
                        "pyramid level {level} ({size} points) is not smaller than level {}",
                        level - 1
                    )));
                }
                let picks = farthest_point_sample(&prev.cloud, size)?;
                PyramidLevel {
                    cloud: prev.cloud.select(&picks),
                    root: picks.iter().map(|&i| prev.root[i]).collect(),
                    parent: picks,
                }
            }
        };
        levels.push(next);
    }
    Ok(DensityPyramid { levels })
}
