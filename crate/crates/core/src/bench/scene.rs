//! Seeded synthetic cross-source scenes.
//!
//! A room-like base surface (floor, two walls, boxes and spheres) is split
//! into two overlapping views. The source view is moved by a random rigid
//! motion; the target view is voxel-downsampled to the requested density
//! ratio. Both get Gaussian noise and uniform clutter.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{apply_transform, voxel_downsample, Point3, PointCloud, RigidTransform};

/// Side length of the square room floor, meters.
pub const ROOM_SIZE: f64 = 2.4;
/// Wall height, meters.
pub const ROOM_HEIGHT: f64 = 1.2;

/// Bounding-box diagonal of every generated base surface.
pub fn scene_diameter() -> f64 {
    (2.0 * ROOM_SIZE * ROOM_SIZE + ROOM_HEIGHT * ROOM_HEIGHT).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    /// Points sampled on the base surface.
    pub base_points: usize,
    /// Source-to-target density ratio (>= 1); the target is thinned by it.
    pub density_ratio: f64,
    /// Gaussian noise standard deviation, meters.
    pub noise: f64,
    /// Fraction of each final cloud that is uniform clutter, in [0, 1).
    pub outlier_fraction: f64,
    /// Fraction of each view shared with the other, in (0, 1].
    pub overlap: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            base_points: 6600,
            density_ratio: 4.0,
            noise: 0.005 * scene_diameter(),
            outlier_fraction: 0.3,
            overlap: 0.7,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.density_ratio >= 1.0) || !self.density_ratio.is_finite() {
            return bad(format!(
                "density ratio must be >= 1, got {}",
                self.density_ratio
            ));
        }
        if !(self.overlap > 0.0 && self.overlap <= 1.0) {
            return bad(format!("overlap must lie in (0, 1], got {}", self.overlap));
        }
        if !(self.outlier_fraction >= 0.0 && self.outlier_fraction < 1.0) {
            return bad(format!(
                "outlier fraction must lie in [0, 1), got {}",
                self.outlier_fraction
            ));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if self.base_points < 100 {
            return bad("a scene needs at least 100 base points".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkScene {
    pub source: PointCloud,
    pub target: PointCloud,
    /// Maps source coordinates into the target frame.
    pub ground_truth: RigidTransform,
    pub params: SceneParams,
    pub seed: u64,
    pub diameter: f64,
    /// Surface points before outliers are appended.
    pub source_inliers: usize,
    pub target_inliers: usize,
}

/// Random rotation, uniform over SO(3).
pub fn random_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-9 {
            return UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                q[0], q[1], q[2], q[3],
            ));
        }
    }
}

/// Uniform point in a ball of the given radius.
pub fn random_in_ball<R: Rng>(rng: &mut R, radius: f64) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm_squared() <= 1.0 {
            return v * radius;
        }
    }
}

/// Planar parallelogram `origin + s*u + t*v`, `s, t` in [0, 1].
#[derive(Clone, Copy)]
struct Patch {
    origin: Vector3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
}

#[derive(Clone, Copy)]
enum Surface {
    Patch(Patch),
    Sphere { center: Vector3<f64>, radius: f64 },
}

impl Surface {
    fn area(&self) -> f64 {
        match self {
            Surface::Patch(p) => p.u.cross(&p.v).norm(),
            Surface::Sphere { radius, .. } => 4.0 * std::f64::consts::PI * radius * radius,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Vector3<f64> {
        match self {
            Surface::Patch(p) => p.origin + p.u * rng.random::<f64>() + p.v * rng.random::<f64>(),
            Surface::Sphere { center, radius } => loop {
                let d: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let d = Vector3::from(d);
                let n = d.norm();
                if n > 1e-9 {
                    break center + d * (*radius / n);
                }
            },
        }
    }
}

fn build_surfaces<R: Rng>(rng: &mut R) -> Vec<Surface> {
    let half = ROOM_SIZE / 2.0;
    let mut out = vec![
        // floor
        Surface::Patch(Patch {
            origin: Vector3::new(-half, -half, 0.0),
            u: Vector3::new(ROOM_SIZE, 0.0, 0.0),
            v: Vector3::new(0.0, ROOM_SIZE, 0.0),
        }),
        // two walls
        Surface::Patch(Patch {
            origin: Vector3::new(-half, -half, 0.0),
            u: Vector3::new(0.0, ROOM_SIZE, 0.0),
            v: Vector3::new(0.0, 0.0, ROOM_HEIGHT),
        }),
        Surface::Patch(Patch {
            origin: Vector3::new(-half, -half, 0.0),
            u: Vector3::new(ROOM_SIZE, 0.0, 0.0),
            v: Vector3::new(0.0, 0.0, ROOM_HEIGHT),
        }),
    ];
    let n_boxes = rng.random_range(3..=5);
    for _ in 0..n_boxes {
        let size = Vector3::new(
            rng.random_range(0.2..0.7),
            rng.random_range(0.2..0.7),
            rng.random_range(0.2..0.8),
        );
        let yaw: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let cx = rng.random_range(-half + 0.4..half - 0.4);
        let cy = rng.random_range(-half + 0.4..half - 0.4);
        let (s, c) = yaw.sin_cos();
        let ex = Vector3::new(c, s, 0.0) * size.x;
        let ey = Vector3::new(-s, c, 0.0) * size.y;
        let ez = Vector3::new(0.0, 0.0, size.z);
        let base = Vector3::new(cx, cy, 0.0) - ex * 0.5 - ey * 0.5;
        let faces = [
            Patch {
                origin: base + ez,
                u: ex,
                v: ey,
            },
            Patch {
                origin: base,
                u: ex,
                v: ez,
            },
            Patch {
                origin: base + ey,
                u: ex,
                v: ez,
            },
            Patch {
                origin: base,
                u: ey,
                v: ez,
            },
            Patch {
                origin: base + ex,
                u: ey,
                v: ez,
            },
        ];
        out.extend(faces.into_iter().map(Surface::Patch));
    }
    let n_spheres = rng.random_range(1..=3);
    for _ in 0..n_spheres {
        let radius = rng.random_range(0.12..0.3);
        let center = Vector3::new(
            rng.random_range(-half + 0.3..half - 0.3),
            rng.random_range(-half + 0.3..half - 0.3),
            radius + rng.random_range(0.0..0.5),
        );
        out.push(Surface::Sphere { center, radius });
    }
    out
}

fn sample_base<R: Rng>(rng: &mut R, n: usize) -> Vec<Point3> {
    let surfaces = build_surfaces(rng);
    let total: f64 = surfaces.iter().map(Surface::area).sum();
    let mut pts = Vec::with_capacity(n + surfaces.len());
    let mut carried = 0.0;
    for s in &surfaces {
        let exact = n as f64 * s.area() / total + carried;
        let count = exact.round().max(0.0);
        carried = exact - count;
        for _ in 0..count as usize {
            pts.push(Point3::from(s.sample(rng)));
        }
    }
    pts
}

/// Voxel size whose downsampling keeps about `1 / ratio` of the points.
pub fn voxel_for_ratio(cloud: &PointCloud, ratio: f64) -> Result<f64> {
    let goal = (cloud.len() as f64 / ratio).max(1.0);
    let mut lo = 1e-4;
    let mut hi = cloud.diameter().max(1e-3);
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        let n = voxel_downsample(cloud, mid)?.len() as f64;
        if n > goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn add_noise<R: Rng>(pts: &mut [Point3], sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma > 0");
    for p in pts {
        p.x += normal.sample(rng);
        p.y += normal.sample(rng);
        p.z += normal.sample(rng);
    }
}

fn add_outliers<R: Rng>(pts: &mut Vec<Point3>, fraction: f64, rng: &mut R) {
    if fraction == 0.0 || pts.is_empty() {
        return;
    }
    let count = ((pts.len() as f64) * fraction / (1.0 - fraction)).round() as usize;
    let (lo, hi) = PointCloud::from_points_unchecked(pts.clone())
        .bounds()
        .expect("non-empty");
    for _ in 0..count {
        let p = Point3::new(
            rng.random_range(lo.x..=hi.x),
            rng.random_range(lo.y..=hi.y),
            rng.random_range(lo.z..=hi.z),
        );
        pts.push(p);
    }
}

/// Generate a scene; identical `(params, seed)` always give identical scenes.
pub fn generate_scene(params: &SceneParams, seed: u64) -> Result<BenchmarkScene> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = sample_base(&mut rng, params.base_points);

    // split along a random direction into two views sharing `overlap`
    let dir = random_rotation(&mut rng) * Vector3::z();
    let keep = 1.0 / (2.0 - params.overlap);
    let mut proj: Vec<f64> = base.iter().map(|p| p.coords.dot(&dir)).collect();
    let n = base.len();
    let (src_view, dst_view) = if params.overlap >= 1.0 {
        (base.clone(), base.clone())
    } else {
        proj.sort_by(f64::total_cmp);
        let cut = ((n as f64 * keep).round() as usize).clamp(1, n);
        let src_max = proj[cut - 1];
        let dst_min = proj[n - cut];
        let src: Vec<Point3> = base
            .iter()
            .copied()
            .filter(|p| p.coords.dot(&dir) <= src_max)
            .collect();
        let dst: Vec<Point3> = base
            .iter()
            .copied()
            .filter(|p| p.coords.dot(&dir) >= dst_min)
            .collect();
        (src, dst)
    };

    let diameter = scene_diameter();
    let motion = RigidTransform::from_rotation(
        random_rotation(&mut rng).to_rotation_matrix(),
        random_in_ball(&mut rng, diameter),
    );

    let mut target = PointCloud::from_points_unchecked(dst_view);
    if params.density_ratio > 1.0 {
        let voxel = voxel_for_ratio(&target, params.density_ratio)?;
        target = voxel_downsample(&target, voxel)?;
    }
    let mut target_pts = target.into_points();
    let mut source_pts = src_view;
    add_noise(&mut source_pts, params.noise, &mut rng);
    add_noise(&mut target_pts, params.noise, &mut rng);
    let source_inliers = source_pts.len();
    let target_inliers = target_pts.len();
    add_outliers(&mut source_pts, params.outlier_fraction, &mut rng);
    add_outliers(&mut target_pts, params.outlier_fraction, &mut rng);

    let source = apply_transform(&motion, &PointCloud::new(source_pts)?);
    Ok(BenchmarkScene {
        source,
        target: PointCloud::new(target_pts)?,
        ground_truth: motion.inverse(),
        params: *params,
        seed,
        diameter,
        source_inliers,
        target_inliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_protocol() {
        let params = SceneParams {
            base_points: 2000,
            density_ratio: 1.0,
            noise: 0.0,
            outlier_fraction: 0.0,
            overlap: 1.0,
        };
        let s = generate_scene(&params, 7).unwrap();
        assert_eq!(s.source.len(), s.target.len());
        let moved = apply_transform(&s.ground_truth, &s.source);
        for (a, b) in moved.iter().zip(s.target.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn deterministic_by_seed() {
        let p = SceneParams::default();
        let a = generate_scene(&p, 11).unwrap();
        let b = generate_scene(&p, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&p, 12).unwrap();
        assert_ne!(a.source, c.source);
    }

    #[test]
    fn density_ratio_thins_target() {
        let p = SceneParams {
            outlier_fraction: 0.0,
            overlap: 1.0,
            ..SceneParams::default()
        };
        let s = generate_scene(&p, 3).unwrap();
        let ratio = s.source.len() as f64 / s.target.len() as f64;
        assert!(ratio > 2.0 && ratio < 8.0, "ratio {ratio}");
    }

    #[test]
    fn outlier_fraction_is_respected() {
        let p = SceneParams::default();
        let s = generate_scene(&p, 5).unwrap();
        let f = 1.0 - s.source_inliers as f64 / s.source.len() as f64;
        assert!((f - 0.3).abs() < 0.01);
        assert!(s.source_inliers >= 5000);
    }

    #[test]
    fn rejects_bad_params() {
        let bad = [
            SceneParams {
                density_ratio: 0.5,
                ..SceneParams::default()
            },
            SceneParams {
                overlap: 0.0,
                ..SceneParams::default()
            },
            SceneParams {
                outlier_fraction: 1.0,
                ..SceneParams::default()
            },
        ];
        for p in bad {
            assert!(generate_scene(&p, 0).is_err());
        }
    }
}
