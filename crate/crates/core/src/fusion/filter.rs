//! Linear Kalman filter on `[position; velocity]` in the navigation frame.

use nalgebra::{DMatrix, DVector, Matrix6, SMatrix, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{condition_number, symmetrize};
use crate::so3::{Mat3, UnitQuaternion, Vec3};

pub type Mat6 = Matrix6<f64>;
pub type Vec6 = Vector6<f64>;

/// Innovation covariances worse conditioned than this are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseState {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub p: Mat6,
}

impl BaseState {
    pub fn new(t: f64, position: Vec3, velocity: Vec3, sigma_position: f64, sigma_velocity: f64) -> Self {
        let a = sigma_position * sigma_position;
        let b = sigma_velocity * sigma_velocity;
        Self {
            t,
            position,
            velocity,
            p: Mat6::from_diagonal(&Vec6::new(a, a, a, b, b, b)),
        }
    }

    pub fn vector(&self) -> Vec6 {
        Vec6::new(
            self.position.x,
            self.position.y,
            self.position.z,
            self.velocity.x,
            self.velocity.y,
            self.velocity.z,
        )
    }

    fn set_vector(&mut self, x: &Vec6) {
        self.position = Vec3::new(x[0], x[1], x[2]);
        self.velocity = Vec3::new(x[3], x[4], x[5]);
    }

    pub fn is_finite(&self) -> bool {
        self.vector().iter().chain(self.p.iter()).all(|v| v.is_finite())
    }

    /// Rotates position, velocity and covariance about the navigation origin.
    pub fn rotate(&mut self, r: &Mat3) {
        self.position = r * self.position;
        self.velocity = r * self.velocity;
        let mut t = Mat6::zeros();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        t.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
        self.p = symmetrize(&(t * self.p * t.transpose()));
    }
}

/// Navigation-frame base acceleration driving the prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionInput {
    pub u: Vec3,
}

impl FusionInput {
    /// `u = R f_b + g_n` with `g_n = (0, 0, -g)`.
    pub fn from_specific_force(attitude: &UnitQuaternion, f_b: &Vec3, gravity: f64) -> Self {
        Self {
            u: attitude.rotate(f_b) - Vec3::new(0.0, 0.0, gravity),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// `Q_d = Q dt`.
    #[default]
    PiecewiseConstant,
    /// Exact integral of the continuous noise through the transition.
    VanLoan,
}

/// Continuous process noise and measurement noise blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    pub q: Mat6,
    /// Leg-odometry velocity.
    pub r1: Mat3,
    /// Exteroceptive velocity.
    pub r2: Mat3,
    /// Exteroceptive position.
    pub r3: Mat3,
}

impl NoiseConfig {
    pub fn from_sigmas(sigma_accel: f64, sigma_position: f64, r1: [f64; 3], r2: [f64; 3], r3: [f64; 3]) -> Self {
        let a = sigma_accel * sigma_accel;
        let p = sigma_position * sigma_position;
        Self {
            q: Mat6::from_diagonal(&Vec6::new(p, p, p, a, a, a)),
            r1: Mat3::from_diagonal(&Vec3::from(r1)),
            r2: Mat3::from_diagonal(&Vec3::from(r2)),
            r3: Mat3::from_diagonal(&Vec3::from(r3)),
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::from_sigmas(0.02, 0.0, [0.01; 3], [0.005; 3], [0.01; 3])
    }
}

pub fn transition(dt: f64) -> Mat6 {
    let mut phi = Mat6::identity();
    phi.fixed_view_mut::<3, 3>(0, 3).copy_from(&(Mat3::identity() * dt));
    phi
}

pub fn discrete_noise(q: &Mat6, dt: f64, mode: Discretization) -> Mat6 {
    match mode {
        Discretization::PiecewiseConstant => q * dt,
        Discretization::VanLoan => {
            let mut f = Mat6::zeros();
            f.fixed_view_mut::<3, 3>(0, 3).copy_from(&Mat3::identity());
            let mut m = SMatrix::<f64, 12, 12>::zeros();
            m.fixed_view_mut::<6, 6>(0, 0).copy_from(&(-f * dt));
            m.fixed_view_mut::<6, 6>(0, 6).copy_from(&(q * dt));
            m.fixed_view_mut::<6, 6>(6, 6).copy_from(&(f.transpose() * dt));
            let e = m.exp();
            let phi_t = e.fixed_view::<6, 6>(6, 6).into_owned();
            let upper = e.fixed_view::<6, 6>(0, 6).into_owned();
            symmetrize(&(phi_t.transpose() * upper))
        }
    }
}

/// Constant-acceleration propagation over `dt`.
pub fn predict(state: &BaseState, input: &FusionInput, q: &Mat6, dt: f64, mode: Discretization) -> BaseState {
    let u = input.u;
    let phi = transition(dt);
    BaseState {
        t: state.t + dt,
        position: state.position + state.velocity * dt + 0.5 * u * dt * dt,
        velocity: state.velocity + u * dt,
        p: symmetrize(&(phi * state.p * phi.transpose() + discrete_noise(q, dt, mode))),
    }
}

/// Stacked linear measurement `z = H x + noise`.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub z: DVector<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl Measurement {
    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// Kalman update with Joseph-form covariance.
pub fn update(state: &BaseState, meas: &Measurement) -> Result<BaseState> {
    let Measurement { z, h, r } = meas;
    let p = DMatrix::from_column_slice(6, 6, state.p.as_slice());
    let s = h * &p * h.transpose() + r;
    let condition = condition_number(&s);
    if !(condition <= MAX_INNOVATION_CONDITION) {
        return Err(Error::SingularInnovation { condition });
    }
    let s_inv = s
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| s.try_inverse())
        .ok_or(Error::SingularInnovation { condition })?;
    let k = &p * h.transpose() * s_inv;
    let x = DVector::from_column_slice(state.vector().as_slice());
    let x = &x + &k * (z - h * &x);
    let i_kh = DMatrix::identity(6, 6) - &k * h;
    let p = &i_kh * p * i_kh.transpose() + &k * r * k.transpose();

    let mut out = *state;
    out.set_vector(&Vec6::from_column_slice(x.as_slice()));
    out.p = symmetrize(&Mat6::from_column_slice(p.as_slice()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_symmetric_psd;
    use proptest::prelude::*;

    fn state() -> BaseState {
        BaseState::new(0.0, Vec3::zeros(), Vec3::zeros(), 0.1, 0.2)
    }

    #[test]
    fn gravity_cancels_at_rest() {
        let q = UnitQuaternion::from_euler(0.2, -0.3, 1.0);
        let f = q.inverse_rotate(&Vec3::new(0.0, 0.0, 9.81));
        assert!(FusionInput::from_specific_force(&q, &f, 9.81).u.norm() < 1e-12);
    }

    #[test]
    fn zero_input_only_grows_covariance() {
        let s = state();
        let q = NoiseConfig::default().q;
        let n = predict(&s, &FusionInput { u: Vec3::zeros() }, &q, 0.01, Discretization::PiecewiseConstant);
        assert_eq!(n.position, s.position);
        assert_eq!(n.velocity, s.velocity);
        let phi = transition(0.01);
        assert!((n.p - (phi * s.p * phi.transpose() + q * 0.01)).norm() < 1e-15);
    }

    #[test]
    fn double_integration_closed_form() {
        let mut s = state();
        let input = FusionInput {
            u: Vec3::new(1.0, 0.0, 0.0),
        };
        let q = NoiseConfig::default().q;
        for _ in 0..1000 {
            s = predict(&s, &input, &q, 1e-3, Discretization::PiecewiseConstant);
        }
        assert!((s.position - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-9);
        assert!((s.velocity - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn van_loan_matches_closed_form() {
        let sa = 0.3f64;
        let sp = 0.01f64;
        let q = NoiseConfig::from_sigmas(sa, sp, [1.0; 3], [1.0; 3], [1.0; 3]).q;
        let dt = 0.01;
        let qd = discrete_noise(&q, dt, Discretization::VanLoan);
        // Oracle: integral of Phi(s) Q Phi(s)^T over [0, dt], per axis.
        let a = sa * sa;
        let p = sp * sp;
        for i in 0..3 {
            assert!((qd[(i, i)] - (p * dt + a * dt.powi(3) / 3.0)).abs() < 1e-15);
            assert!((qd[(i, i + 3)] - a * dt * dt / 2.0).abs() < 1e-15);
            assert!((qd[(i + 3, i + 3)] - a * dt).abs() < 1e-15);
        }
    }

    // 1-D oracle: each axis decouples when P, H and R are axis-aligned.
    #[test]
    fn update_matches_scalar_kalman() {
        let mut s = state();
        s.position = Vec3::new(1.0, -2.0, 0.5);
        s.velocity = Vec3::new(0.3, 0.1, -0.2);
        let pv = 0.04f64;
        let r = 0.01f64;
        let z = [0.5, 0.0, -0.1];
        let meas = Measurement {
            z: DVector::from_column_slice(&z),
            h: {
                let mut h = DMatrix::zeros(3, 6);
                for i in 0..3 {
                    h[(i, i + 3)] = 1.0;
                }
                h
            },
            r: DMatrix::identity(3, 3) * r,
        };
        let out = update(&s, &meas).unwrap();
        for i in 0..3 {
            let k = pv / (pv + r);
            let v = s.velocity[i] + k * (z[i] - s.velocity[i]);
            let p = (1.0 - k) * pv;
            assert!((out.velocity[i] - v).abs() < 1e-12);
            assert!((out.p[(i + 3, i + 3)] - p).abs() < 1e-12);
            assert_eq!(out.position[i], s.position[i]);
        }
    }

    #[test]
    fn tiny_noise_snaps_to_measurement() {
        let s = state();
        let mut h = DMatrix::zeros(3, 6);
        for i in 0..3 {
            h[(i, i)] = 1.0;
        }
        let meas = Measurement {
            z: DVector::from_column_slice(&[1.0, 2.0, 3.0]),
            h,
            r: DMatrix::identity(3, 3) * 1e-9,
        };
        let out = update(&s, &meas).unwrap();
        assert!((out.position - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-6);
        assert!(out.p.fixed_view::<3, 3>(0, 0).trace() < 1e-8);
    }

    #[test]
    fn ill_conditioned_innovation_is_rejected() {
        let mut s = state();
        s.p = Mat6::zeros();
        let mut h = DMatrix::zeros(3, 6);
        h[(0, 0)] = 1.0;
        h[(1, 1)] = 1.0;
        h[(2, 2)] = 1.0;
        let mut r = DMatrix::identity(3, 3);
        r[(2, 2)] = 1e-14;
        let meas = Measurement {
            z: DVector::zeros(3),
            h,
            r,
        };
        assert!(matches!(update(&s, &meas), Err(Error::SingularInnovation { .. })));
    }

    proptest! {
        #[test]
        fn predict_trace_nondecreasing(dt in 1e-4..0.01f64, ux in -5.0..5.0f64, sa in 0.0..1.0f64) {
            let s = state();
            let q = NoiseConfig::from_sigmas(sa, 0.0, [0.01; 3], [0.01; 3], [0.01; 3]).q;
            for mode in [Discretization::PiecewiseConstant, Discretization::VanLoan] {
                let n = predict(&s, &FusionInput { u: Vec3::new(ux, 0.0, 0.0) }, &q, dt, mode);
                prop_assert!(n.p.trace() >= s.p.trace());
                prop_assert!(is_symmetric_psd(&n.p, 1e-12));
            }
        }

        #[test]
        fn repeated_updates_shrink_trace(r in 1e-4..1.0f64, n in 1usize..6) {
            let mut s = state();
            let mut h = DMatrix::zeros(6, 6);
            for i in 0..6 { h[(i, i)] = 1.0; }
            let meas = Measurement { z: DVector::from_element(6, 0.3), h, r: DMatrix::identity(6, 6) * r };
            for _ in 0..n {
                let next = update(&s, &meas).unwrap();
                prop_assert!(next.p.trace() <= s.p.trace() + 1e-15);
                prop_assert!(is_symmetric_psd(&next.p, 1e-12));
                s = next;
            }
        }
    }
}
