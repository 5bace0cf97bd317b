//! Exogenous Kalman filter on the attitude error state `[dtheta, db]`.
//!
//! Transition and measurement Jacobians are evaluated on the observer
//! trajectory (`x_bar`), never on the filter's own estimate: the estimate only
//! enters through the error `x_hat - x_bar`. Attitude errors are right
//! perturbations, `q = q_bar * exp(dtheta)`.

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use super::nlo::NloState;
use super::{AttitudeState, PseudoNorthMeasurement};
use crate::linalg::{min_eigenvalue, project_psd, symmetrize};
use crate::so3::{quat_integrate, skew, Mat3, UnitQuaternion, Vec3};

pub type Mat6 = Matrix6<f64>;
pub type Vec6 = Vector6<f64>;

/// Eigenvalues below `-PSD_TOLERANCE` trigger projection.
const PSD_TOLERANCE: f64 = 1e-12;
const PSD_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct XkfNoise {
    /// Gyro white noise density (rad/s/sqrt(Hz)).
    pub sigma_gyro: f64,
    /// Gyro bias random walk density (rad/s^2/sqrt(Hz)).
    pub sigma_bias_walk: f64,
    /// Accelerometer measurement standard deviation as a gravity observation
    /// (m/s^2); includes unmodelled base acceleration.
    pub sigma_accel: f64,
    /// Pseudo-north measurement standard deviation (unit vector components).
    pub sigma_pseudo_north: f64,
}

impl Default for XkfNoise {
    fn default() -> Self {
        Self {
            sigma_gyro: 0.005,
            sigma_bias_walk: 1e-4,
            sigma_accel: 0.5,
            sigma_pseudo_north: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct XkfStepInfo {
    pub psd_projected: bool,
    pub min_eigenvalue: f64,
}

/// `x_hat (-) x_bar` as a 6-vector.
pub fn error_between(q_hat: &UnitQuaternion, b_hat: &Vec3, bar: &NloState) -> Vec6 {
    let dtheta = (bar.q.inverse() * *q_hat).log();
    let db = b_hat - bar.bias;
    Vec6::new(dtheta[0], dtheta[1], dtheta[2], db[0], db[1], db[2])
}

/// `x_bar (+) d`.
pub fn inject(bar: &NloState, d: &Vec6) -> (UnitQuaternion, Vec3) {
    let dtheta = Vec3::new(d[0], d[1], d[2]);
    let db = Vec3::new(d[3], d[4], d[5]);
    (bar.q * UnitQuaternion::exp(&dtheta), bar.bias + db)
}

/// Error-state transition `I + F dt` evaluated on the observer state.
pub fn transition(bar: &NloState, gyro: &Vec3, dt: f64) -> Mat6 {
    let mut phi = Mat6::identity();
    let w = gyro - bar.bias;
    phi.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(Mat3::identity() - skew(&w) * dt));
    phi.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(-Mat3::identity() * dt));
    phi
}

pub fn process_noise(noise: &XkfNoise, dt: f64) -> Mat6 {
    let g = noise.sigma_gyro.powi(2) * dt;
    let b = noise.sigma_bias_walk.powi(2) * dt;
    Mat6::from_diagonal(&Vec6::new(g, g, g, b, b, b))
}

/// Jacobian of `R^T v` with respect to a right perturbation of `R`.
pub fn vector_jacobian(bar_q: &UnitQuaternion, v_nav: &Vec3) -> Matrix3x6<f64> {
    let mut h = Matrix3x6::zeros();
    h.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&skew(&bar_q.inverse_rotate(v_nav)));
    h
}

/// Kalman update of the error `d` with one 3-row block, Joseph form.
///
/// With `locked_axis` set, the gain is projected so that neither the rotation
/// error nor the bias error moves along that body axis. The Joseph form keeps
/// `P` consistent for the projected gain.
fn block_update(
    d: &mut Vec6,
    p: &mut Mat6,
    residual: &Vec3,
    h: &Matrix3x6<f64>,
    r: &Matrix3<f64>,
    locked_axis: Option<Vec3>,
) {
    let innovation = residual - h * *d;
    let s = h * *p * h.transpose() + r;
    let Some(s_inv) = s.try_inverse() else {
        return;
    };
    let mut k = *p * h.transpose() * s_inv;
    if let Some(u) = locked_axis {
        let proj = Matrix3::identity() - u * u.transpose();
        let top = proj * k.fixed_rows::<3>(0);
        let bottom = proj * k.fixed_rows::<3>(3);
        k.fixed_rows_mut::<3>(0).copy_from(&top);
        k.fixed_rows_mut::<3>(3).copy_from(&bottom);
    }
    *d += k * innovation;
    let i_kh = Mat6::identity() - k * h;
    *p = i_kh * *p * i_kh.transpose() + k * r * k.transpose();
}

/// One filter step from `prev_bar` to `bar`.
///
/// `gyro` is the body-frame rate used over `[prev_bar.t, bar.t]`. The
/// measurement rows that are present in `meas` are applied; `f_ref` is the
/// navigation-frame specific force at rest (`(0, 0, g)`) and `m_ref` the
/// pseudo-north direction.
#[allow(clippy::too_many_arguments)]
pub fn xkf_step(
    state: &AttitudeState,
    prev_bar: &NloState,
    bar: &NloState,
    gyro: &Vec3,
    meas: &PseudoNorthMeasurement,
    f_ref: &Vec3,
    m_ref: &Vec3,
    dt: f64,
    noise: &XkfNoise,
) -> (AttitudeState, XkfStepInfo) {
    // Predict along the observer trajectory.
    let d_prev = error_between(&state.q, &state.bias, prev_bar);
    let phi = transition(prev_bar, gyro, dt);
    let propagated = NloState {
        t: bar.t,
        q: quat_integrate(&prev_bar.q, &(gyro - prev_bar.bias), dt),
        bias: prev_bar.bias,
    };
    let (q_pred, b_pred) = inject(&propagated, &(phi * d_prev));
    let mut p = phi * state.p * phi.transpose() + process_noise(noise, dt);

    // Update, linearized on the corrected observer state.
    let mut d = error_between(&q_pred, &b_pred, bar);
    if let Some(f_b) = meas.f_b {
        let h = vector_jacobian(&bar.q, f_ref);
        let residual = f_b - bar.q.inverse_rotate(f_ref);
        let r = Matrix3::identity() * noise.sigma_accel.powi(2);
        // Gravity carries no heading information: keep yaw and its bias out of it.
        let up = bar.q.inverse_rotate(f_ref).normalize();
        block_update(&mut d, &mut p, &residual, &h, &r, Some(up));
    }
    if let Some(m_b) = meas.m_b {
        let m_ref = m_ref.normalize();
        let h = vector_jacobian(&bar.q, &m_ref);
        let residual = m_b.normalize() - bar.q.inverse_rotate(&m_ref);
        let r = Matrix3::identity() * noise.sigma_pseudo_north.powi(2);
        block_update(&mut d, &mut p, &residual, &h, &r, None);
    }
    let (q, bias) = inject(bar, &d);

    let mut p = symmetrize(&p);
    let min_eig = min_eigenvalue(&p);
    let mut info = XkfStepInfo {
        psd_projected: false,
        min_eigenvalue: min_eig,
    };
    if min_eig < -PSD_TOLERANCE || !p.iter().all(|v| v.is_finite()) {
        p = project_psd(&p, PSD_FLOOR);
        info.psd_projected = true;
    }
    (AttitudeState { t: bar.t, q, bias, p }, info)
}
