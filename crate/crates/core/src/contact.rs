//! Ground reaction forces from joint torques, thresholded into stance flags.
//!
//! Each leg's joint rows of `M xdd + h = tau + J^T F` are solved for the foot
//! force with the 3x3 foot Jacobian: `F_i = J_i^-T (h_i + M_i xdd - tau_i)`.
//! Forces are expressed in the body frame and act from the ground on the foot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    dynamics_terms, leg_gravity_torques, leg_jacobian, DynamicsFidelity, GeneralizedState, JointState, Leg,
    RobotModel, NUM_LEGS,
};
use crate::so3::{UnitQuaternion, Vec3};

const SINGULAR_SIGMA: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GrfEstimate {
    pub t: f64,
    pub forces: [Vec3; NUM_LEGS],
    /// `false` where the leg Jacobian was singular and no force could be solved.
    pub valid: [bool; NUM_LEGS],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub t: f64,
    pub stance: [bool; NUM_LEGS],
}

impl ContactState {
    pub fn count(&self) -> usize {
        self.stance.iter().filter(|s| **s).count()
    }
}

/// Base motion needed by the full-dynamics mode, in the navigation frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BaseMotion {
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
    pub linear_acceleration: Vec3,
    pub angular_acceleration: Vec3,
}

/// Solves one leg: `J^T F = h_leg - tau`.
fn solve_leg(model: &RobotModel, leg: Leg, ql: &Vec3, residual: &Vec3) -> Result<Vec3> {
    let j = leg_jacobian(model, leg, ql);
    if j.singular_values().min() < SINGULAR_SIGMA {
        return Err(Error::SingularJacobian(leg));
    }
    j.transpose().lu().solve(residual).ok_or(Error::SingularJacobian(leg))
}

/// Per-leg quasi-static GRF: `h` reduced to the gravity loading of the leg links.
pub fn estimate_grf_quasi_static(
    model: &RobotModel,
    joints: &JointState,
    attitude: &UnitQuaternion,
) -> (GrfEstimate, Vec<Error>) {
    let mut forces = [Vec3::zeros(); NUM_LEGS];
    let mut valid = [false; NUM_LEGS];
    let mut errors = Vec::new();
    for leg in Leg::ALL {
        let ql = joints.leg_q(leg);
        let h = leg_gravity_torques(model, attitude, leg, &ql);
        match solve_leg(model, leg, &ql, &(h - joints.leg_tau(leg))) {
            Ok(f) => {
                forces[leg.index()] = f;
                valid[leg.index()] = true;
            }
            Err(e) => errors.push(e),
        }
    }
    (
        GrfEstimate {
            t: joints.t,
            forces,
            valid,
        },
        errors,
    )
}

/// Full-dynamics GRF with joint accelerations supplied by the caller.
pub fn estimate_grf_full(
    model: &RobotModel,
    joints: &JointState,
    attitude: &UnitQuaternion,
    base: &BaseMotion,
    joint_acceleration: &[f64; 12],
) -> (GrfEstimate, Vec<Error>) {
    let mut state = GeneralizedState::at_rest(*attitude, joints.q);
    for i in 0..3 {
        state.velocity[i] = base.linear_velocity[i];
        state.velocity[3 + i] = base.angular_velocity[i];
        state.acceleration[i] = base.linear_acceleration[i];
        state.acceleration[3 + i] = base.angular_acceleration[i];
    }
    for i in 0..12 {
        state.velocity[6 + i] = joints.qd[i];
        state.acceleration[6 + i] = joint_acceleration[i];
    }
    let (m, h) = dynamics_terms(model, &state, DynamicsFidelity::Full);
    let lhs = m * state.acceleration + h;

    let mut forces = [Vec3::zeros(); NUM_LEGS];
    let mut valid = [false; NUM_LEGS];
    let mut errors = Vec::new();
    for leg in Leg::ALL {
        let rows = lhs.fixed_rows::<3>(6 + 3 * leg.index()).into_owned();
        match solve_leg(model, leg, &joints.leg_q(leg), &(rows - joints.leg_tau(leg))) {
            Ok(f) => {
                forces[leg.index()] = f;
                valid[leg.index()] = true;
            }
            Err(e) => errors.push(e),
        }
    }
    (
        GrfEstimate {
            t: joints.t,
            forces,
            valid,
        },
        errors,
    )
}

/// `alpha_i = 1` iff `|F_i| > f_min` (strict).
pub fn contact_state(grf: &GrfEstimate, f_min: f64) -> ContactState {
    let mut stance = [false; NUM_LEGS];
    for (s, f) in stance.iter_mut().zip(&grf.forces) {
        *s = f.norm() > f_min;
    }
    ContactState { t: grf.t, stance }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactConfig {
    /// Stance threshold as a fraction of robot weight `m g`.
    pub f_min_weight_fraction: f64,
    /// Absolute threshold in newtons; overrides the fraction when set.
    pub f_min: Option<f64>,
    pub hysteresis: bool,
    /// Release threshold relative to `f_min` when hysteresis is on.
    pub release_ratio: f64,
    pub mode: DynamicsFidelity,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            f_min_weight_fraction: 0.08,
            f_min: None,
            hysteresis: false,
            release_ratio: 0.6,
            mode: DynamicsFidelity::QuasiStatic,
        }
    }
}

impl ContactConfig {
    pub fn threshold(&self, model: &RobotModel) -> f64 {
        self.f_min
            .unwrap_or(self.f_min_weight_fraction * model.total_mass() * model.gravity)
    }
}

/// Stateful contact estimator: holds the previous stance flags (used for
/// singular legs and hysteresis) and the previous joint rates (for the full
/// mode's numerically differentiated joint accelerations).
#[derive(Clone, Debug)]
pub struct ContactEstimator {
    model: RobotModel,
    config: ContactConfig,
    f_min: f64,
    previous: [bool; NUM_LEGS],
    last_rates: Option<(f64, [f64; 12])>,
    pub singular_events: u64,
}

impl ContactEstimator {
    pub fn new(model: RobotModel, config: ContactConfig) -> Self {
        let f_min = config.threshold(&model);
        Self {
            model,
            config,
            f_min,
            previous: [false; NUM_LEGS],
            last_rates: None,
            singular_events: 0,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.f_min
    }

    pub fn update(&mut self, joints: &JointState, attitude: &UnitQuaternion, base: &BaseMotion) -> (GrfEstimate, ContactState) {
        let (grf, errors) = match self.config.mode {
            DynamicsFidelity::QuasiStatic => estimate_grf_quasi_static(&self.model, joints, attitude),
            DynamicsFidelity::Full => {
                let mut qdd = [0.0; 12];
                if let Some((t0, qd0)) = self.last_rates {
                    let dt = joints.t - t0;
                    if dt > 0.0 {
                        for i in 0..12 {
                            qdd[i] = (joints.qd[i] - qd0[i]) / dt;
                        }
                    }
                }
                self.last_rates = Some((joints.t, joints.qd));
                estimate_grf_full(&self.model, joints, attitude, base, &qdd)
            }
        };
        self.singular_events += errors.len() as u64;

        let mut stance = [false; NUM_LEGS];
        for i in 0..NUM_LEGS {
            stance[i] = if !grf.valid[i] {
                self.previous[i]
            } else {
                let f = grf.forces[i].norm();
                if self.config.hysteresis && self.previous[i] {
                    f > self.config.release_ratio * self.f_min
                } else {
                    f > self.f_min
                }
            };
        }
        self.previous = stance;
        let contact = ContactState { t: joints.t, stance };
        (grf, contact)
    }
}
