//! Stacking leg-odometry and exteroceptive corrections into one linear
//! measurement: rows are `[leg velocity; extero velocity; extero position]`,
//! each present only when available.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::filter::{Measurement, NoiseConfig};
use crate::error::{Error, Result};
use crate::frames::RigidTransform;
use crate::legodom::{inflate_leg_covariance, LegOdomMeasurement, SlipFlags};
use crate::so3::{Mat3, UnitQuaternion, Vec3};

/// Pose of the sensor frame in the sensor's own world frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExteroPose {
    pub t: f64,
    pub position: Vec3,
    pub attitude: UnitQuaternion,
    /// Optional per-sample position variances (m^2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_var: Option<Vec3>,
}

/// Sensor velocity expressed in the sensor frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExteroTwist {
    pub t: f64,
    pub linear: Vec3,
    pub angular: Vec3,
}

/// One exteroceptive odometry sample, pose plus optional twist.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExteroOdometry {
    pub pose: ExteroPose,
    pub twist: Option<ExteroTwist>,
}

impl ExteroOdometry {
    pub fn t(&self) -> f64 {
        self.pose.t
    }

    /// Body attitude in the sensor world frame.
    pub fn body_attitude(&self, extrinsic: &RigidTransform) -> UnitQuaternion {
        self.pose.attitude * extrinsic.rotation.inverse()
    }
}

/// Body-origin position in the sensor world frame. The lever arm is rotated
/// with the estimated attitude.
pub fn extero_body_position(pose: &ExteroPose, attitude: &UnitQuaternion, extrinsic: &RigidTransform) -> Vec3 {
    pose.position - attitude.rotate(&extrinsic.translation)
}

/// Body-origin velocity in the body frame, from the sensor's own velocity.
pub fn extero_body_velocity(twist: &ExteroTwist, omega_b: &Vec3, extrinsic: &RigidTransform) -> Vec3 {
    extrinsic.rotation.rotate(&twist.linear) - omega_b.cross(&extrinsic.translation)
}

/// Exteroceptive inputs with the frame bookkeeping already resolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExteroContext<'a> {
    pub odometry: &'a ExteroOdometry,
    pub extrinsic: &'a RigidTransform,
    /// Sensor-world origin expressed in the navigation frame.
    pub anchor: Vec3,
    /// Body angular rate (rad/s), for the twist lever arm.
    pub omega_b: Vec3,
    pub use_twist: bool,
    pub use_pose: bool,
}

/// Builds `(z, H, R)`.
pub fn assemble_measurement(
    leg_odom: Option<&LegOdomMeasurement>,
    extero: Option<&ExteroContext>,
    attitude: &UnitQuaternion,
    slip: &SlipFlags,
    kappa: f64,
    noise: &NoiseConfig,
) -> Result<Measurement> {
    let mut blocks: Vec<(Vec3, usize, Mat3)> = Vec::with_capacity(3);
    if let Some(lo) = leg_odom {
        let r1 = inflate_leg_covariance(&noise.r1, slip, kappa);
        blocks.push((attitude.rotate(&lo.velocity), 3, rotate_cov(attitude, &r1)));
    }
    if let Some(ctx) = extero {
        if ctx.use_twist {
            if let Some(twist) = &ctx.odometry.twist {
                let v_b = extero_body_velocity(twist, &ctx.omega_b, ctx.extrinsic);
                blocks.push((attitude.rotate(&v_b), 3, rotate_cov(attitude, &noise.r2)));
            }
        }
        if ctx.use_pose {
            let pose = &ctx.odometry.pose;
            let p = extero_body_position(pose, attitude, ctx.extrinsic) + ctx.anchor;
            let r3 = pose.position_var.map_or(noise.r3, |v| Mat3::from_diagonal(&v));
            blocks.push((p, 0, r3));
        }
    }
    if blocks.is_empty() {
        return Err(Error::NoMeasurement);
    }

    let m = 3 * blocks.len();
    let mut z = DVector::zeros(m);
    let mut h = DMatrix::zeros(m, 6);
    let mut r = DMatrix::zeros(m, m);
    for (k, (zk, col, rk)) in blocks.iter().enumerate() {
        let row = 3 * k;
        z.rows_mut(row, 3).copy_from(zk);
        h.view_mut((row, *col), (3, 3)).fill_with_identity();
        r.view_mut((row, row), (3, 3)).copy_from(rk);
    }
    Ok(Measurement { z, h, r })
}

/// Body-frame covariance expressed in the navigation frame.
fn rotate_cov(attitude: &UnitQuaternion, c: &Mat3) -> Mat3 {
    if *c == Mat3::identity() * c[(0, 0)] {
        return *c;
    }
    let rm = attitude.matrix();
    rm * c * rm.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NUM_LEGS;

    fn lo(v: Vec3) -> LegOdomMeasurement {
        LegOdomMeasurement {
            t: 0.0,
            velocity: v,
            stance_count: 4,
            contributions: [v; NUM_LEGS],
        }
    }

    fn odom(twist: bool) -> ExteroOdometry {
        ExteroOdometry {
            pose: ExteroPose {
                t: 0.0,
                position: Vec3::new(1.0, 2.0, 0.5),
                attitude: UnitQuaternion::identity(),
                position_var: None,
            },
            twist: twist.then_some(ExteroTwist {
                t: 0.0,
                linear: Vec3::new(0.3, 0.0, 0.0),
                angular: Vec3::zeros(),
            }),
        }
    }

    #[test]
    fn camera_case_is_nine_dimensional() {
        let noise = NoiseConfig::default();
        let od = odom(true);
        let ext = RigidTransform::identity();
        let ctx = ExteroContext {
            odometry: &od,
            extrinsic: &ext,
            anchor: Vec3::zeros(),
            omega_b: Vec3::zeros(),
            use_twist: true,
            use_pose: true,
        };
        let q = UnitQuaternion::identity();
        let m = assemble_measurement(Some(&lo(Vec3::x())), Some(&ctx), &q, &SlipFlags::none(0.0), 100.0, &noise).unwrap();
        assert_eq!(m.dim(), 9);
        assert_eq!(m.h.shape(), (9, 6));
        assert_eq!(m.r.shape(), (9, 9));
        // H = [0 I; 0 I; I 0]
        let mut expected = DMatrix::zeros(9, 6);
        for i in 0..3 {
            expected[(i, 3 + i)] = 1.0;
            expected[(3 + i, 3 + i)] = 1.0;
            expected[(6 + i, i)] = 1.0;
        }
        assert_eq!(m.h, expected);
        assert_eq!(m.r.view((0, 3), (3, 6)), DMatrix::<f64>::zeros(3, 6));
        assert_eq!(m.r.view((6, 6), (3, 3)), DMatrix::from_diagonal_element(3, 3, 0.01));
    }

    #[test]
    fn lidar_case_is_six_dimensional() {
        let noise = NoiseConfig::default();
        let od = odom(false);
        let ext = RigidTransform::identity();
        let ctx = ExteroContext {
            odometry: &od,
            extrinsic: &ext,
            anchor: Vec3::zeros(),
            omega_b: Vec3::zeros(),
            use_twist: true,
            use_pose: true,
        };
        let q = UnitQuaternion::identity();
        let m = assemble_measurement(Some(&lo(Vec3::x())), Some(&ctx), &q, &SlipFlags::none(0.0), 100.0, &noise).unwrap();
        assert_eq!(m.dim(), 6);
        let mut r = DMatrix::zeros(6, 6);
        r.view_mut((0, 0), (3, 3)).copy_from(&noise.r1);
        r.view_mut((3, 3), (3, 3)).copy_from(&noise.r3);
        assert_eq!(m.r, r);
        assert_eq!(m.z.rows(3, 3), DVector::from_column_slice(&[1.0, 2.0, 0.5]));
    }

    #[test]
    fn slip_inflates_only_leg_block() {
        let noise = NoiseConfig::default();
        let od = odom(true);
        let ext = RigidTransform::identity();
        let ctx = ExteroContext {
            odometry: &od,
            extrinsic: &ext,
            anchor: Vec3::zeros(),
            omega_b: Vec3::zeros(),
            use_twist: true,
            use_pose: true,
        };
        let slip = SlipFlags {
            t: 0.0,
            slipping: [true, false, true, false],
        };
        let q = UnitQuaternion::from_euler(0.0, 0.0, 0.7);
        let m = assemble_measurement(Some(&lo(Vec3::x())), Some(&ctx), &q, &slip, 100.0, &noise).unwrap();
        let r1 = m.r.view((0, 0), (3, 3)).into_owned();
        assert!((r1 - DMatrix::from_diagonal_element(3, 3, 0.01 * 1e4)).norm() < 1e-9);
        assert_eq!(m.r.view((3, 3), (3, 3)).into_owned(), DMatrix::from_diagonal_element(3, 3, 0.005));
        assert_eq!(m.r.view((6, 6), (3, 3)).into_owned(), DMatrix::from_diagonal_element(3, 3, 0.01));
    }

    #[test]
    fn nothing_to_assemble() {
        let r = assemble_measurement(
            None,
            None,
            &UnitQuaternion::identity(),
            &SlipFlags::none(0.0),
            100.0,
            &NoiseConfig::default(),
        );
        assert!(matches!(r, Err(Error::NoMeasurement)));
    }

    #[test]
    fn lever_arms() {
        let ext = RigidTransform::new(UnitQuaternion::from_euler(0.0, 0.0, 0.5), Vec3::new(0.3, 0.0, 0.1));
        let att = UnitQuaternion::from_euler(0.0, 0.0, 1.0);
        let p_body = Vec3::new(2.0, -1.0, 0.4);
        let omega = Vec3::new(0.1, -0.2, 0.8);
        let v_body_b = Vec3::new(0.4, 0.1, 0.0);
        // Ground truth sensor pose and velocity from the body state.
        let pose = ExteroPose {
            t: 0.0,
            position: p_body + att.rotate(&ext.translation),
            attitude: att * ext.rotation,
            position_var: None,
        };
        let v_sensor_b = v_body_b + omega.cross(&ext.translation);
        let twist = ExteroTwist {
            t: 0.0,
            linear: ext.rotation.inverse_rotate(&v_sensor_b),
            angular: Vec3::zeros(),
        };
        assert!((extero_body_position(&pose, &att, &ext) - p_body).norm() < 1e-14);
        assert!((extero_body_velocity(&twist, &omega, &ext) - v_body_b).norm() < 1e-14);
        let od = ExteroOdometry { pose, twist: None };
        assert!(od.body_attitude(&ext).angle_to(&att) < 1e-14);
    }
}
