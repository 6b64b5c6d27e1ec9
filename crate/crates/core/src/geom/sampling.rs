use std::collections::HashMap;

use nalgebra::Vector3;

use super::kdtree::dist2;
use super::{Point3, PointCloud};
use crate::error::{Error, Result};

/// Replace the points of every occupied voxel by their centroid.
///
/// The grid is anchored at the origin (`cell = floor(x / voxel)`); output
/// points appear in order of the first input point that fell in each cell.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0) || !voxel.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "voxel size must be > 0, got {voxel}"
        )));
    }
    let mut cells: HashMap<[i64; 3], usize> = HashMap::new();
    let mut sums: Vec<(Vector3<f64>, usize)> = Vec::new();
    for p in cloud {
        let key = [
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        ];
        let slot = *cells.entry(key).or_insert_with(|| {
            sums.push((Vector3::zeros(), 0));
            sums.len() - 1
        });
        sums[slot].0 += p.coords;
        sums[slot].1 += 1;
    }
    Ok(PointCloud::from_points_unchecked(
        sums.into_iter()
            .map(|(s, n)| Point3::from(s / n as f64))
            .collect(),
    ))
}

/// Deterministic farthest point sampling; returns indices in selection order.
///
/// The seed is the point farthest from the centroid; every later pick maximizes
/// the distance to the already selected set. Ties go to the lowest index.
pub fn farthest_point_sample(cloud: &PointCloud, m: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "sample count {m} outside 1..={n}"
        )));
    }
    let pts = cloud.points();
    let centroid = cloud.centroid().expect("non-empty");
    let mut seed = 0;
    let mut seed_d = f64::NEG_INFINITY;
    for (i, p) in pts.iter().enumerate() {
        let d = dist2(p, &centroid);
        if d > seed_d {
            seed_d = d;
            seed = i;
        }
    }

    let mut selected = Vec::with_capacity(m);
    let mut min_d = vec![f64::INFINITY; n];
    let mut current = seed;
    selected.push(current);
    min_d[current] = f64::NEG_INFINITY;
    while selected.len() < m {
        let c = pts[current];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let slot = &mut min_d[i];
            if *slot == f64::NEG_INFINITY {
                continue;
            }
            let d = dist2(p, &c);
            if d < *slot {
                *slot = d;
            }
            if *slot > best_d {
                best_d = *slot;
                best = i;
            }
        }
        current = best;
        min_d[current] = f64::NEG_INFINITY;
        selected.push(current);
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn combinations2(n: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
    }

    #[test]
    fn single_voxel_collapses_to_centroid() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(Point3::new(
                0.01 + 0.01 * (i & 1) as f64,
                0.02 + 0.01 * ((i >> 1) & 1) as f64,
                0.03 + 0.01 * ((i >> 2) & 1) as f64,
            ));
        }
        let c = PointCloud::new(pts).unwrap();
        let out = voxel_downsample(&c, 0.1).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0] - c.centroid().unwrap()).norm() < 1e-15);
    }

    #[test]
    fn voxel_hand_partition() {
        let c =
            PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [0.04, 0.0, 0.0], [0.2, 0.0, 0.0]]).unwrap();
        let out = voxel_downsample(&c, 0.1).unwrap();
        assert_eq!(out.len(), 2);
        assert!((out[0] - Point3::new(0.02, 0.0, 0.0)).norm() < 1e-15);
        assert!((out[1] - Point3::new(0.2, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn voxel_edge_cases() {
        assert!(voxel_downsample(&PointCloud::default(), 0.1)
            .unwrap()
            .is_empty());
        let c = PointCloud::from_xyz(&[[0.0, 0.0, 0.0]]).unwrap();
        assert!(voxel_downsample(&c, 0.0).is_err());
        assert!(voxel_downsample(&c, -1.0).is_err());
    }

    #[test]
    fn fps_collinear_picks_extremes() {
        let c = PointCloud::from_xyz(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [3.0, 0.0, 0.0],
        ])
        .unwrap();
        // brute force: the 2-subset with largest separation
        let (bi, bj) = combinations2(4)
            .max_by(|a, b| {
                let da = (c[a.0] - c[a.1]).norm();
                let db = (c[b.0] - c[b.1]).norm();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let mut got = farthest_point_sample(&c, 2).unwrap();
        got.sort();
        assert_eq!(got, vec![bi, bj]);
        // centroid at 1.5: both ends tie, lowest index seeds
        assert_eq!(farthest_point_sample(&c, 1).unwrap(), vec![0]);
    }

    #[test]
    fn fps_full_and_range() {
        let c = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.5, 0.0], [2.0, 0.0, 7.0]]).unwrap();
        let mut all = farthest_point_sample(&c, 3).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
        assert!(farthest_point_sample(&c, 0).is_err());
        assert!(farthest_point_sample(&c, 4).is_err());
    }
}
