//! Rigid transforms and sensor mounting.

use serde::{Deserialize, Serialize};

use crate::so3::{UnitQuaternion, Vec3};

/// `p_parent = rotation * p_child + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }

    /// `self * other`: first `other`, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let r = self.rotation.inverse();
        RigidTransform {
            rotation: r,
            translation: -r.rotate(&self.translation),
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// Mounting of every sensor relative to the body frame (body <- sensor).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Extrinsics {
    pub imu: RigidTransform,
    pub camera: RigidTransform,
    pub lidar: RigidTransform,
}

impl Default for Extrinsics {
    fn default() -> Self {
        Self {
            imu: RigidTransform::identity(),
            camera: RigidTransform::new(
                UnitQuaternion::from_euler(0.0, 10f64.to_radians(), 0.0),
                Vec3::new(0.32, 0.0, 0.06),
            ),
            lidar: RigidTransform::new(UnitQuaternion::identity(), Vec3::new(-0.05, 0.0, 0.16)),
        }
    }
}

/// Which exteroceptive sensor feeds the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExteroSensor {
    Camera,
    #[default]
    Lidar,
}

impl Extrinsics {
    pub fn extero(&self, sensor: ExteroSensor) -> &RigidTransform {
        match sensor {
            ExteroSensor::Camera => &self.camera,
            ExteroSensor::Lidar => &self.lidar,
        }
    }
}
