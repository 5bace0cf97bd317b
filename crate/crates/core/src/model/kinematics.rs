use nalgebra::Rotation3;

use super::{leg_slice, Leg, RobotModel, NUM_JOINTS};
use crate::error::{Error, Result};
use crate::so3::{Mat3, Vec3};

// Margin kept away from full extension / full fold when solving IK.
const REACH_MARGIN: f64 = 1e-3;

fn rot_x(a: f64) -> Mat3 {
    *Rotation3::from_axis_angle(&Vec3::x_axis(), a).matrix()
}

fn rot_y(a: f64) -> Mat3 {
    *Rotation3::from_axis_angle(&Vec3::y_axis(), a).matrix()
}

struct Chain {
    haa: Vec3,
    hfe: Vec3,
    kfe: Vec3,
    foot: Vec3,
    haa_axis: Vec3,
    flex_axis: Vec3,
    r_hip: Mat3,
    r_thigh: Mat3,
    r_shank: Mat3,
}

fn chain(model: &RobotModel, leg: Leg, ql: &Vec3) -> Chain {
    let r_hip = rot_x(ql[0]);
    let r_thigh = r_hip * rot_y(ql[1]);
    let r_shank = r_hip * rot_y(ql[1] + ql[2]);
    let haa = model.hip_offsets[leg.index()];
    let hfe = haa + r_hip * Vec3::new(0.0, leg.side() * model.hip_roll_offset, 0.0);
    let kfe = hfe + r_thigh * Vec3::new(0.0, 0.0, -model.thigh_length);
    let foot = kfe + r_shank * Vec3::new(0.0, 0.0, -model.shank_length);
    Chain {
        haa,
        hfe,
        kfe,
        foot,
        haa_axis: Vec3::x(),
        flex_axis: r_hip * Vec3::y(),
        r_hip,
        r_thigh,
        r_shank,
    }
}

/// Foot position in the body frame from the three joint angles of `leg`.
pub fn leg_foot_position(model: &RobotModel, leg: Leg, ql: &Vec3) -> Vec3 {
    chain(model, leg, ql).foot
}

pub fn foot_position(model: &RobotModel, q: &[f64; NUM_JOINTS], leg: Leg) -> Vec3 {
    leg_foot_position(model, leg, &leg_slice(q, leg))
}

/// d(foot position) / d(leg joints), body frame.
pub fn leg_jacobian(model: &RobotModel, leg: Leg, ql: &Vec3) -> Mat3 {
    let c = chain(model, leg, ql);
    Mat3::from_columns(&[
        c.haa_axis.cross(&(c.foot - c.haa)),
        c.flex_axis.cross(&(c.foot - c.hfe)),
        c.flex_axis.cross(&(c.foot - c.kfe)),
    ])
}

pub fn foot_jacobian(model: &RobotModel, q: &[f64; NUM_JOINTS], leg: Leg) -> Mat3 {
    leg_jacobian(model, leg, &leg_slice(q, leg))
}

/// Center of mass of one leg link with its Jacobians, all in the body frame.
#[derive(Clone, Copy, Debug)]
pub struct LinkPoint {
    pub com: Vec3,
    /// d(com) / d(leg joints).
    pub jacobian: Mat3,
    /// Link frame to body frame.
    pub rotation: Mat3,
    /// Link angular velocity (body frame) per unit leg joint rate.
    pub angular_jacobian: Mat3,
}

/// Hip, thigh and shank centers of mass.
pub fn link_points(model: &RobotModel, leg: Leg, ql: &Vec3) -> [LinkPoint; 3] {
    let c = chain(model, leg, ql);
    let side = leg.side();
    let hip_com = c.haa + c.r_hip * Vec3::new(0.0, side * model.hip_link.com, 0.0);
    let thigh_com = c.hfe + c.r_thigh * Vec3::new(0.0, 0.0, -model.thigh_link.com);
    let shank_com = c.kfe + c.r_shank * Vec3::new(0.0, 0.0, -model.shank_link.com);
    let zero = Vec3::zeros();
    let lin = |p: &Vec3, depth: usize| {
        Mat3::from_columns(&[
            c.haa_axis.cross(&(p - c.haa)),
            if depth >= 1 { c.flex_axis.cross(&(p - c.hfe)) } else { zero },
            if depth >= 2 { c.flex_axis.cross(&(p - c.kfe)) } else { zero },
        ])
    };
    let ang = |depth: usize| {
        Mat3::from_columns(&[
            c.haa_axis,
            if depth >= 1 { c.flex_axis } else { zero },
            if depth >= 2 { c.flex_axis } else { zero },
        ])
    };
    [
        LinkPoint {
            com: hip_com,
            jacobian: lin(&hip_com, 0),
            rotation: c.r_hip,
            angular_jacobian: ang(0),
        },
        LinkPoint {
            com: thigh_com,
            jacobian: lin(&thigh_com, 1),
            rotation: c.r_thigh,
            angular_jacobian: ang(1),
        },
        LinkPoint {
            com: shank_com,
            jacobian: lin(&shank_com, 2),
            rotation: c.r_shank,
            angular_jacobian: ang(2),
        },
    ]
}

/// Closed-form inverse kinematics for a body-frame foot target, on the knee
/// branch selected by `model.knee_bend`.
pub fn inverse_kinematics(model: &RobotModel, leg: Leg, foot: &Vec3) -> Result<Vec3> {
    let v = foot - model.hip_offsets[leg.index()];
    let d = leg.side() * model.hip_roll_offset;
    let yz2 = v.y * v.y + v.z * v.z;
    if yz2 < d * d + REACH_MARGIN * REACH_MARGIN {
        return Err(Error::InfeasibleGait(format!(
            "{} foot target {:?} is inside the hip-roll offset",
            leg.name(),
            foot.as_slice()
        )));
    }
    // Sagittal-plane coordinates of the foot relative to HFE (foot below the hip).
    let wz = -(yz2 - d * d).sqrt();
    let q1 = v.z.atan2(v.y) - wz.atan2(d);
    let wx = v.x;

    let (l1, l2) = (model.thigh_length, model.shank_length);
    let r = (wx * wx + wz * wz).sqrt();
    if r > l1 + l2 - REACH_MARGIN || r < (l1 - l2).abs() + REACH_MARGIN {
        return Err(Error::InfeasibleGait(format!(
            "{} foot target at distance {r:.4} m is outside the leg workspace",
            leg.name()
        )));
    }
    let cos_knee = ((r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let q3 = model.knee_bend[leg.index()] * cos_knee.acos();
    let q2 = (-wx).atan2(-wz) - (l2 * q3.sin()).atan2(l1 + l2 * q3.cos());
    Ok(Vec3::new(wrap(q1), wrap(q2), q3))
}

fn wrap(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = a % two_pi;
    if a > std::f64::consts::PI {
        a -= two_pi;
    } else if a < -std::f64::consts::PI {
        a += two_pi;
    }
    a
}
