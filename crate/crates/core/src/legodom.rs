//! Leg odometry and kinematic slip detection.
//!
//! A stance foot is assumed fixed in the world, so each stance leg gives the
//! body-frame base velocity `-(J q_dot + omega x p_foot)`; the measurement is
//! the mean over stance legs. Slip is flagged per leg when both the
//! normalized velocity discrepancy and the position-norm discrepancy between
//! the controller's desired foot and the measured foot exceed their
//! thresholds. Slipping legs inflate the leg-odometry covariance.

use serde::{Deserialize, Serialize};

use crate::contact::ContactState;
use crate::error::{Error, Result};
use crate::model::{leg_foot_position, leg_jacobian, JointState, Leg, RobotModel, NUM_LEGS};
use crate::so3::{Mat3, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct LegOdomMeasurement {
    pub t: f64,
    /// Base velocity in the body frame.
    pub velocity: Vec3,
    pub stance_count: usize,
    pub contributions: [Vec3; NUM_LEGS],
}

/// Controller reference for every foot, body frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesiredFoot {
    pub t: f64,
    pub position: [Vec3; NUM_LEGS],
    pub velocity: [Vec3; NUM_LEGS],
}

/// Measured foot position and velocity relative to the body, body frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FootKinematics {
    pub position: [Vec3; NUM_LEGS],
    pub velocity: [Vec3; NUM_LEGS],
}

impl FootKinematics {
    pub fn from_joints(model: &RobotModel, joints: &JointState) -> Self {
        let mut position = [Vec3::zeros(); NUM_LEGS];
        let mut velocity = [Vec3::zeros(); NUM_LEGS];
        for leg in Leg::ALL {
            let ql = joints.leg_q(leg);
            position[leg.index()] = leg_foot_position(model, leg, &ql);
            velocity[leg.index()] = leg_jacobian(model, leg, &ql) * joints.leg_qd(leg);
        }
        Self { position, velocity }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlipMetrics {
    pub t: f64,
    /// Normalized velocity discrepancy per leg (dimensionless).
    pub velocity: [f64; NUM_LEGS],
    /// Desired minus measured foot-position norm per leg (m).
    pub position: [f64; NUM_LEGS],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlipFlags {
    pub t: f64,
    pub slipping: [bool; NUM_LEGS],
}

impl SlipFlags {
    pub fn none(t: f64) -> Self {
        Self {
            t,
            slipping: [false; NUM_LEGS],
        }
    }

    pub fn count(&self) -> usize {
        self.slipping.iter().filter(|s| **s).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlipConfig {
    pub enabled: bool,
    /// Velocity normalization offset `m` (m/s).
    pub m: f64,
    pub eps_v: f64,
    pub eps_p: f64,
    /// Per-slipping-leg covariance inflation factor.
    pub kappa: f64,
    /// Maximum age of a desired-foot sample paired with a joint sample (s).
    pub pairing_tolerance: f64,
    /// Experimental: also remove slipping legs from the velocity average.
    pub drop_slipping_legs: bool,
}

impl Default for SlipConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            m: 0.1,
            eps_v: 0.5,
            eps_p: 0.02,
            kappa: 100.0,
            pairing_tolerance: 0.05,
            drop_slipping_legs: false,
        }
    }
}

/// Velocity of the base implied by one stance leg, body frame; zero in swing.
pub fn leg_velocity_contribution(
    model: &RobotModel,
    joints: &JointState,
    omega_b: &Vec3,
    stance: bool,
    leg: Leg,
) -> Vec3 {
    if !stance {
        return Vec3::zeros();
    }
    let ql = joints.leg_q(leg);
    let foot = leg_foot_position(model, leg, &ql);
    let foot_rate = leg_jacobian(model, leg, &ql) * joints.leg_qd(leg);
    -(foot_rate + omega_b.cross(&foot))
}

/// Mean of the stance-leg contributions.
pub fn base_velocity(t: f64, contributions: &[Vec3; NUM_LEGS], stance: &[bool; NUM_LEGS]) -> Result<LegOdomMeasurement> {
    let n = stance.iter().filter(|s| **s).count();
    if n == 0 {
        return Err(Error::NoStanceLegs);
    }
    let sum: Vec3 = contributions
        .iter()
        .zip(stance)
        .filter(|(_, s)| **s)
        .map(|(c, _)| c)
        .sum();
    Ok(LegOdomMeasurement {
        t,
        velocity: sum / n as f64,
        stance_count: n,
        contributions: *contributions,
    })
}

/// Full leg-odometry measurement from a joint sample.
pub fn leg_odometry(
    model: &RobotModel,
    joints: &JointState,
    omega_b: &Vec3,
    contact: &ContactState,
) -> Result<LegOdomMeasurement> {
    let mut contributions = [Vec3::zeros(); NUM_LEGS];
    for leg in Leg::ALL {
        contributions[leg.index()] =
            leg_velocity_contribution(model, joints, omega_b, contact.stance[leg.index()], leg);
    }
    base_velocity(joints.t, &contributions, &contact.stance)
}

/// Per-leg slip metrics from the desired and measured foot kinematics.
pub fn slip_metrics(t: f64, desired: &DesiredFoot, measured: &FootKinematics, m: f64) -> SlipMetrics {
    debug_assert!(m > 0.0);
    let mut velocity = [0.0; NUM_LEGS];
    let mut position = [0.0; NUM_LEGS];
    for i in 0..NUM_LEGS {
        let d = &desired.velocity[i];
        let x = &measured.velocity[i];
        velocity[i] = (0..3)
            .map(|k| {
                let r = (d[k] - x[k]) / (d[k].abs() + m);
                r * r
            })
            .sum::<f64>()
            .sqrt();
        position[i] = desired.position[i].norm() - measured.position[i].norm();
    }
    SlipMetrics { t, velocity, position }
}

/// `beta_i = alpha_i && dV_i > eps_v && dP_i > eps_p`.
pub fn slip_flags(metrics: &SlipMetrics, contact: &ContactState, eps_v: f64, eps_p: f64) -> SlipFlags {
    let mut slipping = [false; NUM_LEGS];
    for i in 0..NUM_LEGS {
        slipping[i] = contact.stance[i] && metrics.velocity[i] > eps_v && metrics.position[i] > eps_p;
    }
    SlipFlags {
        t: metrics.t,
        slipping,
    }
}

/// `R1 * kappa^(number of slipping legs)`.
pub fn inflate_leg_covariance(r1_base: &Mat3, flags: &SlipFlags, kappa: f64) -> Mat3 {
    let n = flags.count();
    if n == 0 {
        return *r1_base;
    }
    r1_base * kappa.powi(n as i32)
}

/// Pairs joint samples with the most recent desired-foot sample and keeps the
/// previous flags when no reference is close enough in time.
#[derive(Clone, Debug)]
pub struct SlipDetector {
    config: SlipConfig,
    reference: Option<DesiredFoot>,
    flags: SlipFlags,
    pub missing_references: u64,
}

impl SlipDetector {
    pub fn new(config: SlipConfig) -> Self {
        Self {
            config,
            reference: None,
            flags: SlipFlags::none(0.0),
            missing_references: 0,
        }
    }

    pub fn config(&self) -> &SlipConfig {
        &self.config
    }

    pub fn push_reference(&mut self, desired: DesiredFoot) {
        self.reference = Some(desired);
    }

    /// Returns the metrics (when a reference was paired) and the current flags.
    pub fn detect(
        &mut self,
        measured: &FootKinematics,
        contact: &ContactState,
    ) -> (Result<SlipMetrics>, SlipFlags) {
        let t = contact.t;
        if !self.config.enabled {
            self.flags = SlipFlags::none(t);
            return (Err(Error::MissingReference { t, tolerance: 0.0 }), self.flags);
        }
        let tol = self.config.pairing_tolerance;
        let paired = self.reference.as_ref().filter(|r| (r.t - t).abs() <= tol);
        match paired {
            Some(desired) => {
                let metrics = slip_metrics(t, desired, measured, self.config.m);
                self.flags = slip_flags(&metrics, contact, self.config.eps_v, self.config.eps_p);
                (Ok(metrics), self.flags)
            }
            None => {
                self.missing_references += 1;
                let mut held = self.flags;
                held.t = t;
                for i in 0..NUM_LEGS {
                    held.slipping[i] &= contact.stance[i];
                }
                self.flags = held;
                (Err(Error::MissingReference { t, tolerance: tol }), held)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{inverse_kinematics, set_leg_slice};
    use crate::so3::UnitQuaternion;
    use proptest::prelude::*;

    fn standing_joints(model: &RobotModel) -> JointState {
        let mut js = JointState::zeros(0.0);
        for leg in Leg::ALL {
            let ql = inverse_kinematics(model, leg, &model.nominal_foot(leg)).unwrap();
            set_leg_slice(&mut js.q, leg, &ql);
        }
        js
    }

    #[test]
    fn zero_rates_zero_contribution() {
        let model = RobotModel::aliengo();
        let js = standing_joints(&model);
        let c = leg_velocity_contribution(&model, &js, &Vec3::zeros(), true, Leg::LF);
        assert_eq!(c, Vec3::zeros());
    }

    #[test]
    fn swing_gates_contribution() {
        let model = RobotModel::aliengo();
        let mut js = standing_joints(&model);
        js.qd = [3.0; 12];
        let c = leg_velocity_contribution(&model, &js, &Vec3::new(1.0, 2.0, 3.0), false, Leg::RH);
        assert_eq!(c, Vec3::zeros());
    }

    // Rigid-body oracle: move the base along a rotating trajectory with the foot
    // pinned in the world, solve IK at t +- h and difference the base position.
    #[test]
    fn pinned_foot_under_rotation_matches_rigid_body_velocity() {
        let model = RobotModel::aliengo();
        let foot_world = Vec3::new(0.25, 0.14, 0.0);
        let omega = Vec3::new(0.0, 0.0, 1.0);
        let v_world = Vec3::new(0.2, -0.1, 0.05);
        let pose = |t: f64| {
            let att = UnitQuaternion::exp(&(omega * t)) * UnitQuaternion::from_euler(0.05, -0.03, 0.2);
            let pos = Vec3::new(0.0, 0.0, 0.38) + v_world * t;
            (att, pos)
        };
        let foot_body = |t: f64| {
            let (att, pos) = pose(t);
            att.inverse_rotate(&(foot_world - pos))
        };
        let h = 1e-6;
        let t0 = 0.1;
        let q_at = |t: f64| inverse_kinematics(&model, Leg::LF, &foot_body(t)).unwrap();
        let ql = q_at(t0);
        let qd = (q_at(t0 + h) - q_at(t0 - h)) / (2.0 * h);
        let mut js = JointState::zeros(t0);
        set_leg_slice(&mut js.q, Leg::LF, &ql);
        set_leg_slice(&mut js.qd, Leg::LF, &qd);

        let (att, _) = pose(t0);
        let omega_b = att.inverse_rotate(&omega);
        let got = leg_velocity_contribution(&model, &js, &omega_b, true, Leg::LF);
        // Oracle: numerically differentiated base position, rotated into the body.
        let v_fd = (pose(t0 + h).1 - pose(t0 - h).1) / (2.0 * h);
        let expected = att.inverse_rotate(&v_fd);
        assert!((got - expected).norm() < 1e-7, "{got:?} vs {expected:?}");
        // The rotation term is what distinguishes this from the pure joint-rate term.
        let without_rotation = -(leg_jacobian(&model, Leg::LF, &ql) * qd);
        assert!((without_rotation - expected).norm() > 0.05);
    }

    #[test]
    fn mean_over_stance_legs() {
        let v = Vec3::new(0.3, -0.1, 0.02);
        let m = base_velocity(0.0, &[v; 4], &[true; 4]).unwrap();
        assert!((m.velocity - v).norm() < 1e-15);
        let m = base_velocity(0.0, &[v, 3.0 * v, Vec3::new(9.0, 9.0, 9.0), Vec3::zeros()], &[true, true, false, false])
            .unwrap();
        assert!((m.velocity - 2.0 * v).norm() < 1e-15);
        assert_eq!(m.stance_count, 2);
        assert!(matches!(base_velocity(0.0, &[v; 4], &[false; 4]), Err(Error::NoStanceLegs)));
    }

    fn feet(vel: Vec3) -> (DesiredFoot, FootKinematics) {
        let p = [Vec3::new(0.2, 0.1, -0.35); 4];
        (
            DesiredFoot {
                t: 0.0,
                position: p,
                velocity: [vel; 4],
            },
            FootKinematics {
                position: p,
                velocity: [vel; 4],
            },
        )
    }

    #[test]
    fn slip_metric_examples() {
        let (d, m) = feet(Vec3::new(0.4, -0.2, 0.1));
        let s = slip_metrics(0.0, &d, &m, 0.1);
        assert_eq!(s.velocity, [0.0; 4]);
        assert_eq!(s.position, [0.0; 4]);

        let (mut d, mut m) = feet(Vec3::zeros());
        d.velocity[0] = Vec3::new(1.0, 0.0, 0.0);
        let s = slip_metrics(0.0, &d, &m, 0.1);
        assert!((s.velocity[0] - 1.0 / 1.1).abs() < 1e-15);

        d.velocity[0] = Vec3::zeros();
        m.velocity[0] = Vec3::new(0.2, 0.0, 0.0);
        let s = slip_metrics(0.0, &d, &m, 0.1);
        assert!((s.velocity[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn flags_need_both_metrics_and_stance() {
        let contact = ContactState {
            t: 0.0,
            stance: [true, true, true, false],
        };
        let metrics = SlipMetrics {
            t: 0.0,
            velocity: [0.1, 0.9, 0.9, 0.9],
            position: [0.001, 0.001, 0.05, 0.05],
        };
        let f = slip_flags(&metrics, &contact, 0.5, 0.02);
        assert_eq!(f.slipping, [false, false, true, false]);
    }

    #[test]
    fn covariance_inflation() {
        let r1 = Mat3::from_diagonal(&Vec3::new(0.01, 0.02, 0.03));
        assert_eq!(inflate_leg_covariance(&r1, &SlipFlags::none(0.0), 100.0), r1);
        let one = SlipFlags {
            t: 0.0,
            slipping: [true, false, false, false],
        };
        assert_eq!(inflate_leg_covariance(&r1, &one, 100.0), r1 * 100.0);
        let two = SlipFlags {
            t: 0.0,
            slipping: [true, false, true, false],
        };
        assert!((inflate_leg_covariance(&r1, &two, 100.0) - r1 * 1e4).norm() < 1e-12);
    }

    #[test]
    fn detector_holds_flags_without_reference() {
        let mut det = SlipDetector::new(SlipConfig::default());
        let (mut d, mut m) = feet(Vec3::new(-0.3, 0.0, 0.0));
        m.velocity[1] = Vec3::new(-0.3, -0.3, 0.0);
        m.position[1] *= 0.8;
        d.t = 1.0;
        det.push_reference(d);
        let contact = ContactState { t: 1.0, stance: [true; 4] };
        let (metrics, flags) = det.detect(&m, &contact);
        assert!(metrics.is_ok());
        assert_eq!(flags.slipping, [false, true, false, false]);

        // Reference now 60 ms old: flags hold.
        let contact = ContactState { t: 1.06, stance: [true; 4] };
        let (metrics, flags) = det.detect(&m, &contact);
        assert!(matches!(metrics, Err(Error::MissingReference { .. })));
        assert_eq!(flags.slipping, [false, true, false, false]);
        assert_eq!(det.missing_references, 1);

        // ...but never on a swing leg.
        let contact = ContactState { t: 1.07, stance: [true, false, true, true] };
        let (_, flags) = det.detect(&m, &contact);
        assert_eq!(flags.slipping, [false; 4]);
    }

    proptest! {
        #[test]
        fn base_velocity_is_permutation_invariant(
            vs in prop::array::uniform4(prop::array::uniform3(-2.0..2.0f64)),
            stance in prop::array::uniform4(any::<bool>()),
            perm in Just([0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            prop_assume!(stance.iter().any(|s| *s));
            let c: [Vec3; 4] = vs.map(Vec3::from);
            let a = base_velocity(0.0, &c, &stance).unwrap();
            let pc = [c[perm[0]], c[perm[1]], c[perm[2]], c[perm[3]]];
            let ps = [stance[perm[0]], stance[perm[1]], stance[perm[2]], stance[perm[3]]];
            let b = base_velocity(0.0, &pc, &ps).unwrap();
            prop_assert!((a.velocity - b.velocity).norm() < 1e-12);
        }

        #[test]
        fn flags_are_monotone_in_metrics(
            v in 0.0..2.0f64, p in -0.1..0.1f64, dv in 0.0..1.0f64, dp in 0.0..0.1f64,
        ) {
            let contact = ContactState { t: 0.0, stance: [true; 4] };
            let lo = SlipMetrics { t: 0.0, velocity: [v; 4], position: [p; 4] };
            let hi = SlipMetrics { t: 0.0, velocity: [v + dv; 4], position: [p + dp; 4] };
            let a = slip_flags(&lo, &contact, 0.5, 0.02);
            let b = slip_flags(&hi, &contact, 0.5, 0.02);
            for i in 0..4 {
                prop_assert!(!a.slipping[i] || b.slipping[i]);
            }
        }

        #[test]
        fn velocity_metric_is_finite_and_nonnegative(
            d in prop::array::uniform3(-5.0..5.0f64), x in prop::array::uniform3(-5.0..5.0f64), m in 1e-6..1.0f64,
        ) {
            let (mut des, mut meas) = feet(Vec3::zeros());
            des.velocity[0] = Vec3::from(d);
            meas.velocity[0] = Vec3::from(x);
            let s = slip_metrics(0.0, &des, &meas, m);
            prop_assert!(s.velocity[0].is_finite() && s.velocity[0] >= 0.0);
        }
    }
}
