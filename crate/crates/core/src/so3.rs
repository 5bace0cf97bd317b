//! Rotations and the handful of SO(3) helpers every other module builds on.
//!
//! Quaternions follow the Hamilton convention, stored `(w, x, y, z)`. A
//! [`UnitQuaternion`] describing the attitude `q_nb` rotates body-frame vectors
//! into the navigation frame. Angular rates are always body-frame, so
//! propagation multiplies on the right: `q(t + dt) = q(t) * exp(omega dt / 2)`.

use std::ops::Mul;

use nalgebra as na;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Unit quaternion, renormalized by every constructor and operation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuaternion {
    inner: na::UnitQuaternion<f64>,
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self {
            inner: na::UnitQuaternion::identity(),
        }
    }

    /// Normalizes `(w, x, y, z)`. Returns `None` for a zero or non-finite input.
    /// Components already unit to within rounding are kept bit-for-bit, so
    /// serialized quaternions read back unchanged.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Option<Self> {
        let q = na::Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 {
            return None;
        }
        let q = if (n - 1.0).abs() <= 1e-14 { q } else { q / n };
        Some(Self {
            inner: na::UnitQuaternion::new_unchecked(q),
        })
    }

    pub fn from_array(wxyz: [f64; 4]) -> Option<Self> {
        Self::from_wxyz(wxyz[0], wxyz[1], wxyz[2], wxyz[3])
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n < 1e-15 {
            return Self::identity();
        }
        Self::exp(&(axis * (angle / n)))
    }

    /// Quaternion of the rotation vector `phi` (axis times angle).
    pub fn exp(phi: &Vec3) -> Self {
        let angle = phi.norm();
        let (w, s) = if angle < 1e-8 {
            // Taylor expansion keeps sin(a/2)/a accurate near zero.
            (1.0 - angle * angle / 8.0, 0.5 - angle * angle / 48.0)
        } else {
            ((0.5 * angle).cos(), (0.5 * angle).sin() / angle)
        };
        Self::from_wxyz(w, s * phi.x, s * phi.y, s * phi.z).expect("exp is always finite")
    }

    /// Rotation vector of the canonical (w >= 0) representative, angle in [0, pi].
    pub fn log(&self) -> Vec3 {
        let [w, x, y, z] = self.to_array();
        let v = Vec3::new(x, y, z);
        let s = v.norm();
        if s < 1e-12 {
            return 2.0 * v;
        }
        let angle = 2.0 * s.atan2(w);
        v * (angle / s)
    }

    /// Roll, pitch, yaw (ZYX intrinsic).
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            inner: na::UnitQuaternion::from_euler_angles(roll, pitch, yaw),
        }
    }

    pub fn euler(&self) -> (f64, f64, f64) {
        self.inner.euler_angles()
    }

    pub fn yaw(&self) -> f64 {
        self.euler().2
    }

    pub fn from_rotation_matrix(r: &RotationMatrix) -> Self {
        let rot = na::Rotation3::from_matrix_unchecked(r.0);
        let q = na::UnitQuaternion::from_rotation_matrix(&rot);
        Self::from_wxyz(q.w, q.i, q.j, q.k).expect("rotation matrices map to unit quaternions")
    }

    pub fn to_rotation_matrix(&self) -> RotationMatrix {
        RotationMatrix(*self.inner.to_rotation_matrix().matrix())
    }

    pub fn matrix(&self) -> Mat3 {
        *self.inner.to_rotation_matrix().matrix()
    }

    /// Components with the sign chosen so that `w >= 0`.
    pub fn to_array(&self) -> [f64; 4] {
        let q = self.inner.quaternion();
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    /// Raw components without canonicalization.
    pub fn raw(&self) -> [f64; 4] {
        let q = self.inner.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn canonical(&self) -> Self {
        Self::from_array(self.to_array()).expect("unit")
    }

    pub fn norm(&self) -> f64 {
        self.inner.quaternion().norm()
    }

    pub fn inverse(&self) -> Self {
        Self {
            inner: self.inner.inverse(),
        }
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.inner.transform_vector(v)
    }

    pub fn inverse_rotate(&self, v: &Vec3) -> Vec3 {
        self.inner.inverse_transform_vector(v)
    }

    /// Rotation angle in [0, pi].
    pub fn angle(&self) -> f64 {
        self.log().norm()
    }

    /// Angle of the relative rotation between two attitudes, in [0, pi].
    pub fn angle_to(&self, other: &Self) -> f64 {
        multiplicative_error(self, other).angle()
    }

    fn renormalized(q: na::Quaternion<f64>) -> Self {
        let n = q.norm();
        Self {
            inner: na::UnitQuaternion::new_unchecked(q / n),
        }
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        quat_multiply(&self, &rhs)
    }
}

impl Serialize for UnitQuaternion {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UnitQuaternion {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let a = <[f64; 4]>::deserialize(deserializer)?;
        Self::from_array(a).ok_or_else(|| serde::de::Error::custom("quaternion must be finite and non-zero"))
    }
}

/// Hamilton product `a * b`, renormalized.
pub fn quat_multiply(a: &UnitQuaternion, b: &UnitQuaternion) -> UnitQuaternion {
    UnitQuaternion::renormalized(a.inner.quaternion() * b.inner.quaternion())
}

/// Integrates a constant body rate over `dt` with the exponential map.
pub fn quat_integrate(q: &UnitQuaternion, omega: &Vec3, dt: f64) -> UnitQuaternion {
    quat_multiply(q, &UnitQuaternion::exp(&(omega * dt)))
}

/// `skew(v) * u == v.cross(u)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `e = q_true^-1 * q_est`, canonicalized so that `w >= 0`.
pub fn multiplicative_error(q_true: &UnitQuaternion, q_est: &UnitQuaternion) -> UnitQuaternion {
    quat_multiply(&q_true.inverse(), q_est).canonical()
}

/// Proper rotation matrix (orthonormal, det +1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Accepts `m` only if `m^T m = I` and `det m = 1` within [`Self::TOLERANCE`].
    pub fn new(m: Mat3) -> Option<Self> {
        let ortho = (m.transpose() * m - Mat3::identity()).norm();
        if ortho < Self::TOLERANCE && (m.determinant() - 1.0).abs() < Self::TOLERANCE {
            Some(Self(m))
        } else {
            None
        }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}
