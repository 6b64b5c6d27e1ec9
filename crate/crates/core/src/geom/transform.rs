use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

/// Tolerance used when validating orthonormality and determinant.
pub const ROTATION_TOL: f64 = 1e-9;

/// A proper rigid motion `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Build a transform, checking `RᵀR = I` and `det R = +1` within [`ROTATION_TOL`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation
            .iter()
            .chain(translation.iter())
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "transform has non-finite entries".into(),
            ));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        let det = rotation.determinant();
        if ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidArgument(format!(
                "not a proper rotation (orthogonality error {ortho:.3e}, det {det})"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Build from a matrix already known to be a rotation (e.g. an SVD product).
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_rotation(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: *rotation.matrix(),
            translation,
        }
    }

    /// Rotation about an axis by `angle` radians, followed by `translation`.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        Self::from_rotation(Rotation3::from_axis_angle(&axis, angle), translation)
    }

    /// Rows of the rotation followed by the translation, 12 values.
    pub fn from_row_major(values: &[f64; 12]) -> Result<Self> {
        let rotation = Matrix3::from_row_slice(&values[..9]);
        let translation = Vector3::new(values[9], values[10], values[11]);
        Self::new(rotation, translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Rotation entries in row-major order.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    #[inline]
    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

pub fn apply_transform(t: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    PointCloud::from_points_unchecked(cloud.iter().map(|p| t.apply(p)).collect())
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn rz90() -> RigidTransform {
        RigidTransform::from_axis_angle(Vector3::z(), FRAC_PI_2, Vector3::zeros())
    }

    #[test]
    fn identity_leaves_cloud_unchanged() {
        let c = PointCloud::new(vec![
            Point3::new(1.0, -2.0, 3.5),
            Point3::new(0.0, 0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(apply_transform(&RigidTransform::identity(), &c), c);
    }

    #[test]
    fn rz90_maps_x_to_y() {
        let p = rz90().apply(&Point3::new(1.0, 0.0, 0.0));
        assert!((p - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inverse_round_trip() {
        let t =
            RigidTransform::from_axis_angle(Vector3::z(), FRAC_PI_2, Vector3::new(1.0, 0.0, 0.0));
        let inv = invert(&t);
        // R⁻¹ = Rz(-90°), t⁻¹ = -R⁻¹ t = -(0,-1,0) = (0,1,0)
        let expected =
            RigidTransform::from_axis_angle(Vector3::z(), -FRAC_PI_2, Vector3::new(0.0, 1.0, 0.0));
        assert!((inv.rotation() - expected.rotation()).abs().max() < 1e-15);
        assert!((inv.translation() - expected.translation()).norm() < 1e-15);

        let c = PointCloud::new(vec![
            Point3::new(0.3, 0.2, -1.0),
            Point3::new(5.0, 1.0, 2.0),
        ])
        .unwrap();
        let back = apply_transform(&compose(&t, &inv), &c);
        for (a, b) in back.iter().zip(c.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn compose_with_identity() {
        let t = RigidTransform::from_axis_angle(
            Vector3::new(1.0, 2.0, 3.0),
            0.7,
            Vector3::new(1.0, 2.0, 3.0),
        );
        assert_eq!(compose(&RigidTransform::identity(), &t), t);
        assert_eq!(
            invert(&RigidTransform::identity()),
            RigidTransform::identity()
        );
    }

    #[test]
    fn compose_applies_right_first() {
        let a = rz90();
        let b = RigidTransform::from_axis_angle(Vector3::x(), 0.3, Vector3::new(0.0, 0.0, 2.0));
        let p = Point3::new(0.4, -1.0, 2.0);
        let lhs = compose(&a, &b).apply(&p);
        let rhs = a.apply(&b.apply(&p));
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(m, Vector3::zeros()).is_err());
        assert!(RigidTransform::new(Matrix3::identity() * 2.0, Vector3::zeros()).is_err());
    }
}
