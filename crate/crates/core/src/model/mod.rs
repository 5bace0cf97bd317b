//! Point-foot quadruped model: geometry, mass properties and joint layout.
//!
//! Joint vectors are always ordered `[LF, RF, LH, RH] x [HAA, HFE, KFE]`. Each
//! leg is a hip-abduction joint about body x, followed by hip and knee flexion
//! joints about the (abducted) y axis. At zero angles the leg hangs straight
//! down from the hip, offset laterally by the hip-roll link.

mod dynamics;
mod kinematics;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::Vec3;

pub use dynamics::{dynamics_terms, leg_gravity_torques, DynamicsFidelity, GeneralizedState};
pub use kinematics::{
    foot_jacobian, foot_position, inverse_kinematics, leg_foot_position, leg_jacobian, link_points,
    LinkPoint,
};

pub const NUM_LEGS: usize = 4;
pub const NUM_JOINTS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    LF,
    RF,
    LH,
    RH,
}

impl Leg {
    pub const ALL: [Leg; 4] = [Leg::LF, Leg::RF, Leg::LH, Leg::RH];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Leg {
        Self::ALL[i]
    }

    /// +1 for left legs, -1 for right legs.
    pub fn side(self) -> f64 {
        match self {
            Leg::LF | Leg::LH => 1.0,
            Leg::RF | Leg::RH => -1.0,
        }
    }

    pub fn is_front(self) -> bool {
        matches!(self, Leg::LF | Leg::RF)
    }

    /// Same-end leg on the other side.
    pub fn mirror(self) -> Leg {
        match self {
            Leg::LF => Leg::RF,
            Leg::RF => Leg::LF,
            Leg::LH => Leg::RH,
            Leg::RH => Leg::LH,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Leg::LF => "LF",
            Leg::RF => "RF",
            Leg::LH => "LH",
            Leg::RH => "RH",
        }
    }
}

pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "LF_HAA", "LF_HFE", "LF_KFE", "RF_HAA", "RF_HFE", "RF_KFE", "LH_HAA", "LH_HFE", "LH_KFE", "RH_HAA",
    "RH_HFE", "RH_KFE",
];

/// Mass properties of one link, expressed in the link frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkInertia {
    pub mass: f64,
    /// Distance of the center of mass from the proximal joint along the link.
    pub com: f64,
    /// Principal moments about the link CoM (kg m^2).
    pub inertia: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub name: String,
    /// Body origin to HAA joint, body frame.
    pub hip_offsets: [Vec3; NUM_LEGS],
    /// Lateral HAA-to-HFE offset (positive; mirrored for right legs).
    pub hip_roll_offset: f64,
    pub thigh_length: f64,
    pub shank_length: f64,
    /// Sign of the knee angle in the nominal posture, per leg.
    pub knee_bend: [f64; NUM_LEGS],
    pub base_mass: f64,
    pub base_inertia: Vec3,
    pub hip_link: LinkInertia,
    pub thigh_link: LinkInertia,
    pub shank_link: LinkInertia,
    /// Nominal base height above the stance feet.
    pub nominal_height: f64,
    pub gravity: f64,
}

impl RobotModel {
    /// Geometry close to a Unitree Aliengo (datasheet-level approximation).
    pub fn aliengo() -> Self {
        Self {
            name: "aliengo".into(),
            hip_offsets: [
                Vec3::new(0.2399, 0.051, 0.0),
                Vec3::new(0.2399, -0.051, 0.0),
                Vec3::new(-0.2399, 0.051, 0.0),
                Vec3::new(-0.2399, -0.051, 0.0),
            ],
            hip_roll_offset: 0.083,
            thigh_length: 0.25,
            shank_length: 0.25,
            knee_bend: [-1.0; 4],
            base_mass: 11.0,
            base_inertia: Vec3::new(0.07, 0.26, 0.24),
            hip_link: LinkInertia {
                mass: 1.1,
                com: 0.04,
                inertia: Vec3::new(0.0008, 0.0010, 0.0008),
            },
            thigh_link: LinkInertia {
                mass: 1.2,
                com: 0.05,
                inertia: Vec3::new(0.0060, 0.0060, 0.0010),
            },
            shank_link: LinkInertia {
                mass: 0.25,
                com: 0.10,
                inertia: Vec3::new(0.0030, 0.0030, 0.0001),
            },
            nominal_height: 0.38,
            gravity: 9.81,
        }
    }

    /// Geometry close to an ANYmal B (datasheet-level approximation), X-configuration knees.
    pub fn anymal() -> Self {
        Self {
            name: "anymal".into(),
            hip_offsets: [
                Vec3::new(0.277, 0.116, 0.0),
                Vec3::new(0.277, -0.116, 0.0),
                Vec3::new(-0.277, 0.116, 0.0),
                Vec3::new(-0.277, -0.116, 0.0),
            ],
            hip_roll_offset: 0.08,
            thigh_length: 0.25,
            shank_length: 0.32,
            knee_bend: [-1.0, -1.0, 1.0, 1.0],
            base_mass: 16.4,
            base_inertia: Vec3::new(0.27, 0.84, 0.95),
            hip_link: LinkInertia {
                mass: 1.4,
                com: 0.04,
                inertia: Vec3::new(0.0015, 0.0020, 0.0015),
            },
            thigh_link: LinkInertia {
                mass: 1.6,
                com: 0.06,
                inertia: Vec3::new(0.0120, 0.0120, 0.0020),
            },
            shank_link: LinkInertia {
                mass: 0.4,
                com: 0.12,
                inertia: Vec3::new(0.0060, 0.0060, 0.0002),
            },
            nominal_height: 0.47,
            gravity: 9.81,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "aliengo" | "aliengo-like" => Ok(Self::aliengo()),
            "anymal" | "anymal-like" => Ok(Self::anymal()),
            other => Err(Error::Config(format!("unknown robot model preset '{other}'"))),
        }
    }

    pub fn leg_mass(&self) -> f64 {
        self.hip_link.mass + self.thigh_link.mass + self.shank_link.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.base_mass + NUM_LEGS as f64 * self.leg_mass()
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [self.hip_roll_offset, self.thigh_length, self.shank_length];
        if lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::Config("link lengths must be positive".into()));
        }
        if !(self.base_mass > 0.0) || !(self.total_mass() > 0.0) {
            return Err(Error::Config("mass must be positive".into()));
        }
        if !(self.gravity >= 0.0) {
            return Err(Error::Config("gravity must be non-negative".into()));
        }
        if self.knee_bend.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::Config("knee_bend entries must be +1 or -1".into()));
        }
        Ok(())
    }

    /// Foot position in the body frame for the nominal standing posture.
    pub fn nominal_foot(&self, leg: Leg) -> Vec3 {
        self.hip_offsets[leg.index()] + Vec3::new(0.0, leg.side() * self.hip_roll_offset, -self.nominal_height)
    }
}

/// Measured joint vectors at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub t: f64,
    pub q: [f64; NUM_JOINTS],
    pub qd: [f64; NUM_JOINTS],
    pub tau: [f64; NUM_JOINTS],
}

impl JointState {
    pub fn zeros(t: f64) -> Self {
        Self {
            t,
            q: [0.0; NUM_JOINTS],
            qd: [0.0; NUM_JOINTS],
            tau: [0.0; NUM_JOINTS],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.q.iter().chain(&self.qd).chain(&self.tau).all(|v| v.is_finite())
    }

    pub fn leg_q(&self, leg: Leg) -> Vec3 {
        leg_slice(&self.q, leg)
    }

    pub fn leg_qd(&self, leg: Leg) -> Vec3 {
        leg_slice(&self.qd, leg)
    }

    pub fn leg_tau(&self, leg: Leg) -> Vec3 {
        leg_slice(&self.tau, leg)
    }
}

pub fn leg_slice(v: &[f64; NUM_JOINTS], leg: Leg) -> Vec3 {
    let i = 3 * leg.index();
    Vec3::new(v[i], v[i + 1], v[i + 2])
}

pub fn set_leg_slice(v: &mut [f64; NUM_JOINTS], leg: Leg, x: &Vec3) {
    let i = 3 * leg.index();
    v[i..i + 3].copy_from_slice(x.as_slice());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for m in [RobotModel::aliengo(), RobotModel::anymal()] {
            m.validate().unwrap();
            assert!(m.total_mass() > 20.0);
        }
        assert!(RobotModel::preset("spot").is_err());
        let mut bad = RobotModel::aliengo();
        bad.thigh_length = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn leg_slices_follow_joint_order() {
        let mut v = [0.0; NUM_JOINTS];
        set_leg_slice(&mut v, Leg::LH, &Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(&v[6..9], &[1.0, 2.0, 3.0]);
        assert_eq!(JOINT_NAMES[7], "LH_HFE");
        assert_eq!(leg_slice(&v, Leg::LH), Vec3::new(1.0, 2.0, 3.0));
    }
}
