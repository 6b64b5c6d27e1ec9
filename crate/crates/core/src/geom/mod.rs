//! Point clouds, rigid transforms, sampling and spatial queries.

mod cloud;
pub mod interp;
pub mod io;
pub mod kdtree;
pub mod sampling;
mod transform;

pub type Point3 = nalgebra::Point3<f64>;

pub use cloud::PointCloud;
pub use interp::interpolate_features;
pub use kdtree::{knn_query, SpatialIndex};
pub use sampling::{farthest_point_sample, voxel_downsample};
pub use transform::{apply_transform, compose, invert, RigidTransform, ROTATION_TOL};

/// Median distance from each point to its nearest other point.
pub fn median_nn_spacing(cloud: &PointCloud, index: &SpatialIndex) -> f64 {
    if cloud.len() < 2 {
        return 0.0;
    }
    let mut d: Vec<f64> = cloud
        .iter()
        .map(|p| index.knn(p, 2).map_or(0.0, |nn| nn[1].1))
        .collect();
    let mid = d.len() / 2;
    *d.select_nth_unstable_by(mid, f64::total_cmp).1
}
