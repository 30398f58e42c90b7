//! Homogeneous feature matrix of a box.
//!
//! The feature frame orders axes as (ground x, up, ground y) so that height
//! sits on the second axis, and a unit point is written `w = (v1, v3, v2, 1)`
//! (length, height, width, 1). Then `Phi(y)^T w` is the surface point of `v0`
//! expressed in that frame.

use nalgebra::{Matrix3x4, Point3, Vector3, Vector4};

use crate::geometry::{BoxParams, UnitPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousPoint(pub Vector4<f64>);

impl HomogeneousPoint {
    pub fn from_unit(v0: &UnitPoint) -> Self {
        HomogeneousPoint(Vector4::new(v0.v1, v0.v3, v0.v2, 1.0))
    }

    pub fn vector(&self) -> &Vector4<f64> {
        &self.0
    }

    /// Selects the center: `Phi^T w_c = c`.
    pub const CENTER: HomogeneousPoint = HomogeneousPoint(Vector4::new(0.0, 0.0, 0.0, 1.0));
    pub const LENGTH: HomogeneousPoint = HomogeneousPoint(Vector4::new(1.0, 0.0, 0.0, 0.0));
    pub const HEIGHT: HomogeneousPoint = HomogeneousPoint(Vector4::new(0.0, 1.0, 0.0, 0.0));
    pub const WIDTH: HomogeneousPoint = HomogeneousPoint(Vector4::new(0.0, 0.0, 1.0, 0.0));
}

/// `Phi(y)^T`, a 3x4 matrix in the feature frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMatrix(pub Matrix3x4<f64>);

impl FeatureMatrix {
    pub fn from_box(b: &BoxParams) -> Self {
        let (s, c) = b.yaw.sin_cos();
        FeatureMatrix(Matrix3x4::new(
            b.l * c, 0.0, -b.w * s, b.c1, //
            0.0, b.h, 0.0, b.c3, //
            b.l * s, 0.0, b.w * c, b.c2,
        ))
    }

    pub fn transposed(&self) -> &Matrix3x4<f64> {
        &self.0
    }

    /// `Phi^T w`, in the feature frame.
    pub fn apply(&self, w: &HomogeneousPoint) -> Vector3<f64> {
        self.0 * w.0
    }
}

/// Ground `(x, y, z)` to feature `(x, z, y)`; the map is its own inverse.
pub fn swap_up_axis(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(v.x, v.z, v.y)
}

pub fn feature_to_ground(v: &Vector3<f64>) -> Point3<f64> {
    Point3::from(swap_up_axis(v))
}
