//! Passive complementary observer with two vector measurements and a
//! projected gyro-bias estimate. Globally convergent (up to the usual
//! unstable equilibrium set) but not noise-optimal; its output is the
//! linearization point of the Kalman filter in [`super::xkf`].

use serde::{Deserialize, Serialize};

use super::{ImuSample, PseudoNorthMeasurement};
use crate::so3::{quat_integrate, UnitQuaternion, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NloGains {
    pub k1: f64,
    pub k2: f64,
    pub kb: f64,
    pub b_max: f64,
    /// Bias learning pauses while the gravity direction disagrees by more
    /// than this angle (rad), so large initial errors are not absorbed
    /// into the bias.
    pub bias_gate: f64,
}

impl Default for NloGains {
    fn default() -> Self {
        Self {
            k1: 2.0,
            k2: 0.5,
            kb: 0.1,
            b_max: 0.2,
            bias_gate: 10f64.to_radians(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NloState {
    pub t: f64,
    pub q: UnitQuaternion,
    pub bias: Vec3,
}

impl NloState {
    pub fn new(t: f64, q: UnitQuaternion) -> Self {
        Self {
            t,
            q,
            bias: Vec3::zeros(),
        }
    }
}

/// Clamps the bias estimate onto the ball of radius `b_max`.
pub fn project_bias(b: &Vec3, b_max: f64) -> Vec3 {
    let n = b.norm();
    if n > b_max {
        b * (b_max / n)
    } else {
        *b
    }
}

/// One observer step.
///
/// `f_ref` and `m_ref` are the navigation-frame directions that `meas.f_b`
/// and `meas.m_b` measure; both sides are normalized. The pseudo-north
/// correction is integrated over `meas.north_interval` because it is only
/// applied when a fresh exteroceptive sample arrives.
pub fn nlo_step(
    state: &NloState,
    imu: &ImuSample,
    f_ref: &Vec3,
    m_ref: &Vec3,
    meas: &PseudoNorthMeasurement,
    dt: f64,
    gains: &NloGains,
) -> NloState {
    debug_assert!(dt > 0.0);
    let mut correction = Vec3::zeros();
    let mut learn_bias = true;
    if let Some(f_b) = meas.f_b {
        let f_hat = state.q.inverse_rotate(&f_ref.normalize());
        let f_b = f_b.normalize();
        learn_bias = f_b.dot(&f_hat) >= gains.bias_gate.cos();
        correction += gains.k1 * dt * f_b.cross(&f_hat);
    }
    if let Some(m_b) = meas.m_b {
        let m_hat = state.q.inverse_rotate(&m_ref.normalize());
        correction += gains.k2 * meas.north_interval * m_b.normalize().cross(&m_hat);
    }
    let rotation = (imu.gyro - state.bias) * dt + correction;
    let q = quat_integrate(&state.q, &rotation, 1.0);
    let bias = if learn_bias {
        project_bias(&(state.bias - gains.kb * correction), gains.b_max)
    } else {
        state.bias
    };
    NloState { t: imu.t, q, bias }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const G: f64 = 9.81;

    fn static_meas(q_true: &UnitQuaternion, north: bool) -> PseudoNorthMeasurement {
        PseudoNorthMeasurement {
            t: 0.0,
            f_b: Some(q_true.inverse_rotate(&Vec3::new(0.0, 0.0, G))),
            m_b: north.then(|| q_true.inverse_rotate(&Vec3::x())),
            north_interval: 0.1,
        }
    }

    #[test]
    fn equilibrium_is_preserved() {
        let q = UnitQuaternion::from_euler(0.1, -0.2, 0.7);
        let mut s = NloState::new(0.0, q);
        let imu = ImuSample {
            t: 0.0,
            gyro: Vec3::zeros(),
            accel: Vec3::zeros(),
        };
        for k in 0..400 {
            let meas = static_meas(&q, k % 40 == 0);
            s = nlo_step(&s, &imu, &Vec3::z(), &Vec3::x(), &meas, 0.0025, &NloGains::default());
        }
        assert!(s.q.angle_to(&q) < 1e-12);
        assert!(s.bias.norm() < 1e-12);
    }

    #[test]
    fn thirty_degree_roll_converges_within_five_seconds() {
        let q_true = UnitQuaternion::identity();
        let mut s = NloState::new(0.0, UnitQuaternion::from_euler(30f64.to_radians(), 0.0, 0.0));
        let dt = 1.0 / 400.0;
        let imu = ImuSample {
            t: 0.0,
            gyro: Vec3::zeros(),
            accel: Vec3::zeros(),
        };
        for k in 0..(5 * 400) {
            let meas = static_meas(&q_true, k % 40 == 0);
            s = nlo_step(&s, &imu, &Vec3::z(), &Vec3::x(), &meas, dt, &NloGains::default());
        }
        let (roll, pitch, _) = s.q.euler();
        assert!(roll.abs().to_degrees() < 1.0, "roll {}", roll.to_degrees());
        assert!(pitch.abs().to_degrees() < 1.0);
    }

    fn run_bias(bias: Vec3, gyro_sigma: f64, seconds: f64, seed: u64) -> Vec<Vec3> {
        let q_true = UnitQuaternion::from_euler(0.05, 0.02, 0.3);
        let mut s = NloState::new(0.0, q_true);
        let dt: f64 = 1.0 / 400.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, gyro_sigma / dt.sqrt()).unwrap();
        let mut history = Vec::new();
        for k in 0..(seconds * 400.0) as usize {
            let imu = ImuSample {
                t: k as f64 * dt,
                gyro: bias + Vec3::from_fn(|_, _| n.sample(&mut rng)),
                accel: Vec3::zeros(),
            };
            let meas = static_meas(&q_true, k % 40 == 0);
            s = nlo_step(&s, &imu, &Vec3::z(), &Vec3::x(), &meas, dt, &NloGains::default());
            history.push(s.bias);
        }
        history
    }

    #[test]
    fn constant_gyro_bias_is_learned() {
        let bias = Vec3::new(0.01, -0.01, 0.01);
        let b = *run_bias(bias, 0.0, 30.0, 0).last().unwrap();
        for i in 0..3 {
            assert!((b[i] - bias[i]).abs() < 0.1 * bias[i].abs(), "{b:?}");
        }
    }

    #[test]
    fn bias_is_learned_under_gyro_noise() {
        let bias = Vec3::new(0.01, -0.01, 0.01);
        let history = run_bias(bias, 0.005, 40.0, 3);
        let tail = &history[history.len() - 4000..];
        let mean: Vec3 = tail.iter().sum::<Vec3>() / tail.len() as f64;
        assert!((mean - bias).norm() < 0.2 * bias.norm(), "{mean:?}");
    }

    #[test]
    fn bias_projection() {
        let b = project_bias(&Vec3::new(0.3, 0.4, 0.0), 0.2);
        assert!((b.norm() - 0.2).abs() < 1e-15);
        assert_eq!(project_bias(&Vec3::new(0.01, 0.0, 0.0), 0.2), Vec3::new(0.01, 0.0, 0.0));
    }
}
