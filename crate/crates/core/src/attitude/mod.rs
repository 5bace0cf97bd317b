//! Cascaded attitude estimation.
//!
//! [`nlo`] runs a globally convergent complementary observer; [`xkf`] is a
//! Kalman filter linearized about that observer's trajectory. Roll and pitch
//! are observed through the accelerometer (gravity), yaw through a
//! pseudo-north vector: the navigation x axis seen through the
//! exteroceptive odometry's attitude.

pub mod nlo;
pub mod xkf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::RigidTransform;
use crate::so3::{UnitQuaternion, Vec3};

pub use nlo::{nlo_step, NloGains, NloState};
pub use xkf::{xkf_step, Mat6, XkfNoise};

/// IMU sample. In the estimator the vectors are already in the body frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    /// Angular rate (rad/s).
    pub gyro: Vec3,
    /// Specific force (m/s^2).
    pub accel: Vec3,
}

impl ImuSample {
    pub fn is_valid(&self, gravity: f64) -> bool {
        self.t.is_finite()
            && self.gyro.iter().chain(self.accel.iter()).all(|v| v.is_finite())
            && self.accel.norm() <= 16.0 * gravity.max(1.0)
    }

    /// Same sample expressed in the body frame, given the IMU mounting.
    pub fn to_body(&self, imu: &RigidTransform) -> ImuSample {
        ImuSample {
            t: self.t,
            gyro: imu.rotation.rotate(&self.gyro),
            accel: imu.rotation.rotate(&self.accel),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttitudeState {
    pub t: f64,
    /// Body to navigation.
    pub q: UnitQuaternion,
    /// Gyro bias, body frame (rad/s).
    pub bias: Vec3,
    /// Error-state covariance `[dtheta, db]`.
    pub p: Mat6,
}

impl AttitudeState {
    pub fn new(t: f64, q: UnitQuaternion) -> Self {
        let a = 0.05f64.powi(2);
        let b = 0.01f64.powi(2);
        Self {
            t,
            q,
            bias: Vec3::zeros(),
            p: Mat6::from_diagonal(&xkf::Vec6::new(a, a, a, b, b, b)),
        }
    }
}

/// Vector measurements available at one IMU tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoNorthMeasurement {
    pub t: f64,
    /// Body-frame specific force; `None` when gated out.
    pub f_b: Option<Vec3>,
    /// Body-frame pseudo-north unit vector; `None` without a fresh sample.
    pub m_b: Option<Vec3>,
    /// Time since the previous pseudo-north sample (s).
    pub north_interval: f64,
}

/// `m_b = R_s^b R_sw^s e_x`: the sensor-world x axis in the body frame.
pub fn pseudo_north(extero_attitude: &UnitQuaternion, extrinsic: &RigidTransform) -> Vec3 {
    let in_sensor = extero_attitude.inverse_rotate(&Vec3::x());
    extrinsic.rotation.rotate(&in_sensor).normalize()
}

/// Pseudo-north from a sample taken at `t_sample`, rejected when older than
/// `horizon` at time `t_now`.
pub fn pseudo_north_at(
    t_now: f64,
    t_sample: f64,
    extero_attitude: &UnitQuaternion,
    extrinsic: &RigidTransform,
    horizon: f64,
) -> Result<Vec3> {
    let age = t_now - t_sample;
    if age > horizon {
        return Err(Error::StaleExtero { age, horizon });
    }
    Ok(pseudo_north(extero_attitude, extrinsic))
}

/// Roll and pitch from a static specific-force sample, with the given yaw.
pub fn attitude_from_gravity(f_b: &Vec3, yaw: f64) -> UnitQuaternion {
    let roll = f_b.y.atan2(f_b.z);
    let pitch = (-f_b.x).atan2((f_b.y * f_b.y + f_b.z * f_b.z).sqrt());
    UnitQuaternion::from_euler(roll, pitch, yaw)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttitudeConfig {
    #[serde(flatten)]
    pub gains: NloGains,
    #[serde(flatten)]
    pub noise: XkfNoise,
    /// Skip the accelerometer when `| |f| - g | > accel_gate * g`.
    pub accel_gate: f64,
    /// Oldest usable exteroceptive sample (s).
    pub stale_horizon: f64,
    pub pseudo_north: bool,
    /// Longest integration step; larger gaps are split.
    pub max_dt: f64,
    /// Longest pseudo-north integration window in the observer (s).
    pub max_north_interval: f64,
}

impl Default for AttitudeConfig {
    fn default() -> Self {
        Self {
            gains: NloGains::default(),
            noise: XkfNoise::default(),
            accel_gate: 0.3,
            stale_horizon: 0.5,
            pseudo_north: true,
            max_dt: 0.01,
            max_north_interval: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttitudeDiagnostics {
    pub psd_projections: u64,
    pub stale_extero: u64,
    pub gated_accel: u64,
    pub pseudo_north_updates: u64,
}

/// Observer and filter run as a cascade, one step per IMU sample.
#[derive(Clone, Debug)]
pub struct AttitudeEstimator {
    config: AttitudeConfig,
    gravity: f64,
    bar: Option<NloState>,
    state: Option<AttitudeState>,
    last_gyro: Vec3,
    pending_north: Option<(f64, Vec3)>,
    last_north_t: Option<f64>,
    pub diagnostics: AttitudeDiagnostics,
}

impl AttitudeEstimator {
    pub fn new(config: AttitudeConfig, gravity: f64) -> Self {
        Self {
            config,
            gravity,
            bar: None,
            state: None,
            last_gyro: Vec3::zeros(),
            pending_north: None,
            last_north_t: None,
            diagnostics: AttitudeDiagnostics::default(),
        }
    }

    pub fn config(&self) -> &AttitudeConfig {
        &self.config
    }

    pub fn is_initialized(&self) -> bool {
        self.state.is_some()
    }

    pub fn initialize(&mut self, t: f64, q: UnitQuaternion, gyro: Vec3) {
        self.bar = Some(NloState::new(t, q));
        self.state = Some(AttitudeState::new(t, q));
        self.last_gyro = gyro;
    }

    pub fn state(&self) -> Option<&AttitudeState> {
        self.state.as_ref()
    }

    pub fn observer(&self) -> Option<&NloState> {
        self.bar.as_ref()
    }

    /// Rotates the whole attitude estimate about the navigation z axis.
    pub fn rotate_yaw(&mut self, dyaw: f64) {
        let rz = UnitQuaternion::from_euler(0.0, 0.0, dyaw);
        if let Some(bar) = &mut self.bar {
            bar.q = rz * bar.q;
        }
        if let Some(s) = &mut self.state {
            s.q = rz * s.q;
        }
    }

    /// Queues a body-frame pseudo-north vector for the next IMU step.
    pub fn push_pseudo_north(&mut self, t: f64, m_b: Vec3) {
        if self.config.pseudo_north {
            self.pending_north = Some((t, m_b));
        }
    }

    /// Propagates and corrects with a body-frame IMU sample.
    pub fn update(&mut self, imu: &ImuSample) -> Option<AttitudeState> {
        let (Some(mut bar), Some(mut state)) = (self.bar, self.state) else {
            return None;
        };
        let dt_total = imu.t - state.t;
        if !(dt_total > 0.0) {
            return Some(state);
        }
        let gyro = 0.5 * (self.last_gyro + imu.gyro);
        self.last_gyro = imu.gyro;

        let f_ref = Vec3::new(0.0, 0.0, self.gravity);
        let m_ref = Vec3::x();
        let accel_ok = (imu.accel.norm() - self.gravity).abs() <= self.config.accel_gate * self.gravity;
        if !accel_ok {
            self.diagnostics.gated_accel += 1;
        }
        let mut m_b = None;
        let mut north_interval = 0.0;
        if let Some((t_north, m)) = self.pending_north.take() {
            let age = imu.t - t_north;
            if age > self.config.stale_horizon {
                self.diagnostics.stale_extero += 1;
            } else {
                m_b = Some(m);
                north_interval = self
                    .last_north_t
                    .map_or(self.config.max_north_interval, |t0| t_north - t0)
                    .clamp(0.0, self.config.max_north_interval);
                self.last_north_t = Some(t_north);
                self.diagnostics.pseudo_north_updates += 1;
            }
        }

        let steps = (dt_total / self.config.max_dt).ceil().max(1.0) as usize;
        let dt = dt_total / steps as f64;
        for k in 0..steps {
            let last = k + 1 == steps;
            let t = state.t + dt;
            let meas = PseudoNorthMeasurement {
                t,
                f_b: (last && accel_ok).then_some(imu.accel),
                m_b: if last { m_b } else { None },
                north_interval,
            };
            let sample = ImuSample {
                t,
                gyro,
                accel: imu.accel,
            };
            let next_bar = nlo_step(&bar, &sample, &f_ref, &m_ref, &meas, dt, &self.config.gains);
            let (next, info) = xkf_step(&state, &bar, &next_bar, &gyro, &meas, &f_ref, &m_ref, dt, &self.config.noise);
            if info.psd_projected {
                self.diagnostics.psd_projections += 1;
            }
            bar = next_bar;
            state = next;
        }
        bar.t = imu.t;
        state.t = imu.t;
        self.bar = Some(bar);
        self.state = Some(state);
        Some(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::Mat3;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn pseudo_north_examples() {
        let id = RigidTransform::identity();
        let m = pseudo_north(&UnitQuaternion::identity(), &id);
        assert!((m - Vec3::x()).norm() < 1e-15);
        let yaw90 = UnitQuaternion::from_euler(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        // Oracle: transpose of the explicit yaw matrix applied to e_x.
        let rz = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let expected = rz.transpose() * Vec3::x();
        assert!((pseudo_north(&yaw90, &id) - expected).norm() < 1e-15);
        assert!((expected - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn stale_extero_is_rejected() {
        let id = RigidTransform::identity();
        let q = UnitQuaternion::identity();
        assert!(pseudo_north_at(1.0, 0.6, &q, &id, 0.5).is_ok());
        assert!(matches!(
            pseudo_north_at(1.0, 0.4, &q, &id, 0.5),
            Err(Error::StaleExtero { .. })
        ));
    }

    #[test]
    fn gravity_initialization_recovers_tilt() {
        let q = UnitQuaternion::from_euler(0.3, -0.2, 0.0);
        let f = q.inverse_rotate(&Vec3::new(0.0, 0.0, 9.81));
        assert!(attitude_from_gravity(&f, 0.0).angle_to(&q) < 1e-12);
    }

    fn run_static(seed: u64, seconds: f64, north: bool, gyro_bias: Vec3) -> (f64, f64) {
        let g = 9.81;
        let rate: f64 = 400.0;
        let dt = 1.0 / rate;
        let q_true = UnitQuaternion::from_euler(0.05, -0.08, 0.6);
        let noise = XkfNoise::default();
        let gyro_n = Normal::new(0.0, noise.sigma_gyro * rate.sqrt()).unwrap();
        let accel_n = Normal::new(0.0, 0.02 * rate.sqrt()).unwrap();
        let north_n = Normal::new(0.0, 0.005).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = AttitudeConfig {
            pseudo_north: north,
            ..AttitudeConfig::default()
        };
        let mut est = AttitudeEstimator::new(config, g);
        est.initialize(0.0, q_true, gyro_bias);
        let f_true = q_true.inverse_rotate(&Vec3::new(0.0, 0.0, g));
        let (mut sq, mut n, mut max_yaw) = (0.0, 0usize, 0.0f64);
        let steps = (seconds * rate) as usize;
        for k in 1..=steps {
            let t = k as f64 * dt;
            if k % 40 == 0 {
                let noisy = q_true * UnitQuaternion::exp(&Vec3::from_fn(|_, _| north_n.sample(&mut rng)));
                est.push_pseudo_north(t, pseudo_north(&noisy, &RigidTransform::identity()));
            }
            let imu = ImuSample {
                t,
                gyro: gyro_bias + Vec3::from_fn(|_, _| gyro_n.sample(&mut rng)),
                accel: f_true + Vec3::from_fn(|_, _| accel_n.sample(&mut rng)),
            };
            let s = est.update(&imu).unwrap();
            assert!((s.q.norm() - 1.0).abs() < 1e-9);
            let e = s.q.angle_to(&q_true);
            sq += e * e;
            n += 1;
            let dyaw = (s.q.inverse() * q_true).yaw().abs();
            max_yaw = max_yaw.max(dyaw);
        }
        assert_eq!(est.diagnostics.psd_projections, 0);
        ((sq / n as f64).sqrt(), max_yaw)
    }

    #[test]
    fn static_attitude_rms_below_half_degree() {
        for seed in 0..10 {
            let (rms, _) = run_static(seed, 60.0, true, Vec3::zeros());
            assert!(rms.to_degrees() < 0.5, "seed {seed}: {}", rms.to_degrees());
        }
    }

    #[test]
    fn roll_pitch_survive_without_pseudo_north() {
        let g = 9.81;
        let q_true = UnitQuaternion::from_euler(0.2, -0.1, 0.0);
        let mut est = AttitudeEstimator::new(
            AttitudeConfig {
                pseudo_north: false,
                ..AttitudeConfig::default()
            },
            g,
        );
        est.initialize(0.0, UnitQuaternion::from_euler(0.0, 0.0, 0.0), Vec3::zeros());
        let f = q_true.inverse_rotate(&Vec3::new(0.0, 0.0, g));
        for k in 1..=4000 {
            let imu = ImuSample {
                t: k as f64 / 400.0,
                gyro: Vec3::zeros(),
                accel: f,
            };
            est.update(&imu);
        }
        let (r, p, _) = est.state().unwrap().q.euler();
        assert!((r - 0.2).abs() < 1e-3 && (p + 0.1).abs() < 1e-3, "{r} {p}");
    }

    #[test]
    fn accelerometer_gate() {
        let mut est = AttitudeEstimator::new(AttitudeConfig::default(), 9.81);
        est.initialize(0.0, UnitQuaternion::identity(), Vec3::zeros());
        let imu = ImuSample {
            t: 0.0025,
            gyro: Vec3::zeros(),
            accel: Vec3::new(0.0, 0.0, 14.0),
        };
        est.update(&imu);
        assert_eq!(est.diagnostics.gated_accel, 1);
        assert!(est.state().unwrap().q.angle() < 1e-12);
    }

    proptest! {
        #[test]
        fn pseudo_north_is_unit(w in -1.0..1.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
            prop_assume!(w * w + x * x + y * y + z * z > 1e-3);
            let q = UnitQuaternion::from_wxyz(w, x, y, z).unwrap();
            let ext = RigidTransform::new(UnitQuaternion::from_euler(0.1, 0.2, 0.3), Vec3::zeros());
            prop_assert!((pseudo_north(&q, &ext).norm() - 1.0).abs() < 1e-12);
        }
    }
}
