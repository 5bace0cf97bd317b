//! Sensor error models: white noise, bias random walks and drifting
//! exteroceptive odometry.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::motion::BaseSample;
use crate::frames::RigidTransform;
use crate::fusion::{ExteroPose, ExteroTwist};
use crate::model::NUM_JOINTS;
use crate::so3::{UnitQuaternion, Vec3};

pub fn gaussian3(rng: &mut ChaCha8Rng, sigma: f64) -> Vec3 {
    if sigma == 0.0 {
        return Vec3::zeros();
    }
    Vec3::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    ) * sigma
}

pub fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    sigma * rng.sample::<f64, _>(StandardNormal)
}

/// IMU error model. Noise terms are densities; the per-sample standard
/// deviation is `density * sqrt(rate)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuNoise {
    /// rad/s/sqrt(Hz)
    pub gyro_density: f64,
    /// m/s^2/sqrt(Hz)
    pub accel_density: f64,
    pub gyro_bias: [f64; 3],
    pub accel_bias: [f64; 3],
    /// rad/s^2/sqrt(Hz)
    pub gyro_bias_walk: f64,
    /// m/s^3/sqrt(Hz)
    pub accel_bias_walk: f64,
}

impl Default for ImuNoise {
    fn default() -> Self {
        Self {
            gyro_density: 1e-3,
            accel_density: 5e-3,
            gyro_bias: [2e-3, -1e-3, 1.5e-3],
            accel_bias: [0.02, -0.01, 0.015],
            gyro_bias_walk: 1e-5,
            accel_bias_walk: 1e-4,
        }
    }
}

impl ImuNoise {
    pub fn ideal() -> Self {
        Self {
            gyro_density: 0.0,
            accel_density: 0.0,
            gyro_bias: [0.0; 3],
            accel_bias: [0.0; 3],
            gyro_bias_walk: 0.0,
            accel_bias_walk: 0.0,
        }
    }
}

/// Joint encoder and torque errors: white noise (standard deviations) plus
/// constant per-joint offsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointNoise {
    pub q: f64,
    pub qd: f64,
    pub tau: f64,
    pub q_bias: [f64; NUM_JOINTS],
    /// Stands in for unmodelled friction in current-based torque estimates (N m).
    pub tau_bias: [f64; NUM_JOINTS],
}

impl Default for JointNoise {
    fn default() -> Self {
        Self {
            q: 1e-3,
            qd: 0.02,
            tau: 0.1,
            q_bias: [0.0; NUM_JOINTS],
            tau_bias: [0.0; NUM_JOINTS],
        }
    }
}

impl JointNoise {
    pub fn ideal() -> Self {
        Self {
            q: 0.0,
            qd: 0.0,
            tau: 0.0,
            q_bias: [0.0; NUM_JOINTS],
            tau_bias: [0.0; NUM_JOINTS],
        }
    }
}

/// Exteroceptive odometry model: the true sensor pose composed with a
/// random-walk drift (applied in the odometry world frame) plus white noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExteroModel {
    pub enabled: bool,
    /// Hz
    pub rate: f64,
    /// Constant delay between capture and timestamp (s).
    pub latency: f64,
    /// Per-axis translation random walk (m/sqrt(s)).
    pub drift_translation: f64,
    /// Per-axis rotation random walk (rad/sqrt(s)).
    pub drift_rotation: f64,
    /// Per-axis white position noise (m).
    pub noise_position: f64,
    /// Per-axis white rotation noise (rad).
    pub noise_rotation: f64,
    /// Emit a twist alongside every pose; defaults to camera only.
    pub twist: Option<bool>,
    /// Per-axis white twist noise (m/s).
    pub twist_noise: f64,
    /// Capture windows `[start, end)` with no output.
    pub dropouts: Vec<[f64; 2]>,
}

impl Default for ExteroModel {
    fn default() -> Self {
        Self {
            enabled: true,
            rate: 10.0,
            latency: 0.0,
            drift_translation: 2e-3,
            drift_rotation: 1e-4,
            noise_position: 0.01,
            noise_rotation: 5e-3,
            twist: None,
            twist_noise: 0.02,
            dropouts: Vec::new(),
        }
    }
}

impl ExteroModel {
    pub fn ideal(twist: Option<bool>) -> Self {
        Self {
            drift_translation: 0.0,
            drift_rotation: 0.0,
            noise_position: 0.0,
            noise_rotation: 0.0,
            twist,
            twist_noise: 0.0,
            ..Self::default()
        }
    }
}

/// Sensor pose in the navigation frame and its velocities (sensor frame).
pub fn sensor_truth(base: &BaseSample, extrinsic: &RigidTransform) -> (Vec3, UnitQuaternion, Vec3, Vec3) {
    let position = base.position + base.attitude.rotate(&extrinsic.translation);
    let attitude = base.attitude * extrinsic.rotation;
    let v_world = base.velocity + base.attitude.rotate(&base.omega_b.cross(&extrinsic.translation));
    let linear = attitude.inverse_rotate(&v_world);
    let angular = extrinsic.rotation.inverse_rotate(&base.omega_b);
    (position, attitude, linear, angular)
}

/// Exteroceptive odometry sampled from a ground-truth trajectory.
///
/// The odometry world frame is gravity-aligned with the navigation axes and
/// has its origin at the sensor's position at `t = 0`. Capture times are
/// `k / rate`; samples are stamped `capture + latency`.
pub fn synth_extero<F>(
    truth: F,
    extrinsic: &RigidTransform,
    model: &ExteroModel,
    duration: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(ExteroPose, Option<ExteroTwist>)>
where
    F: Fn(f64) -> BaseSample,
{
    let mut out = Vec::new();
    if !model.enabled || !(model.rate > 0.0) {
        return out;
    }
    let origin = sensor_truth(&truth(0.0), extrinsic).0;
    let dt = 1.0 / model.rate;
    let mut drift_p = Vec3::zeros();
    let mut drift_r = Vec3::zeros();
    let mut k = 0u64;
    loop {
        let tc = k as f64 / model.rate;
        if tc + model.latency > duration + 1e-9 {
            break;
        }
        if k > 0 {
            drift_p += gaussian3(rng, model.drift_translation * dt.sqrt());
            drift_r += gaussian3(rng, model.drift_rotation * dt.sqrt());
        }
        let np = gaussian3(rng, model.noise_position);
        let nr = gaussian3(rng, model.noise_rotation);
        let nv = gaussian3(rng, model.twist_noise);
        k += 1;
        if model.dropouts.iter().any(|w| tc >= w[0] && tc < w[1]) {
            continue;
        }
        let (p, q, v, w) = sensor_truth(&truth(tc), extrinsic);
        let drift = UnitQuaternion::exp(&drift_r);
        let t = tc + model.latency;
        let pose = ExteroPose {
            t,
            position: drift.rotate(&(p - origin)) + drift_p + np,
            attitude: UnitQuaternion::exp(&nr) * drift * q,
            position_var: None,
        };
        let twist = model.twist.unwrap_or(false).then_some(ExteroTwist {
            t,
            linear: v + nv,
            angular: w,
        });
        out.push((pose, twist));
    }
    out
}
