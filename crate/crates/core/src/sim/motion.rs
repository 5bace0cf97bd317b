//! Analytic base trajectory and terrain height profile.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::so3::{UnitQuaternion, Vec3};

/// Quintic smoothstep and its first two derivatives on `u` (clamped to [0, 1]).
pub fn smoothstep(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let u2 = u * u;
    let u3 = u2 * u;
    (
        u3 * (10.0 - 15.0 * u + 6.0 * u2),
        30.0 * u2 * (1.0 - u) * (1.0 - u),
        60.0 * u * (1.0 - u) * (1.0 - 2.0 * u),
    )
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Terrain {
    #[default]
    Flat,
    /// Smoothed staircase along world x: `up` steps followed by `down` steps.
    Stairs {
        start: f64,
        step_length: f64,
        step_height: f64,
        up: usize,
        down: usize,
        /// Horizontal length of each smoothed riser (m).
        riser: f64,
    },
}

impl Terrain {
    /// Ground height and its first two derivatives with respect to x.
    pub fn height(&self, x: f64) -> (f64, f64, f64) {
        match self {
            Terrain::Flat => (0.0, 0.0, 0.0),
            Terrain::Stairs {
                start,
                step_length,
                step_height,
                up,
                down,
                riser,
            } => {
                let mut h = (0.0, 0.0, 0.0);
                for j in 0..(up + down) {
                    let sign = if j < *up { 1.0 } else { -1.0 };
                    let x0 = start + j as f64 * step_length;
                    let (s, ds, dds) = smoothstep((x - x0) / riser);
                    h.0 += sign * step_height * s;
                    h.1 += sign * step_height * ds / riser;
                    h.2 += sign * step_height * dds / (riser * riser);
                }
                h
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    /// Forward speed along world x (m/s), constant from t = 0.
    pub speed: f64,
    pub lateral_amplitude: f64,
    pub lateral_period: f64,
    pub yaw_amplitude: f64,
    pub yaw_period: f64,
    pub roll_amplitude: f64,
    pub pitch_amplitude: f64,
    pub sway_period: f64,
    pub bob_amplitude: f64,
    pub bob_period: f64,
    /// Base height above the ground; the robot's nominal height when absent.
    pub base_height: Option<f64>,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            speed: 0.3,
            lateral_amplitude: 0.3,
            lateral_period: 20.0,
            yaw_amplitude: 0.15,
            yaw_period: 15.0,
            roll_amplitude: 0.0,
            pitch_amplitude: 0.0,
            sway_period: 4.0,
            bob_amplitude: 0.0,
            bob_period: 2.0,
            base_height: None,
        }
    }
}

/// Base state at one instant. Linear quantities in the world frame, angular
/// quantities in the body frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseSample {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub attitude: UnitQuaternion,
    pub omega_b: Vec3,
    pub omega_dot_b: Vec3,
}

fn sine(amplitude: f64, period: f64, phase: f64, t: f64) -> (f64, f64, f64) {
    if amplitude == 0.0 || period <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let w = TAU / period;
    let a = w * t + phase;
    (amplitude * a.sin(), amplitude * w * a.cos(), -amplitude * w * w * a.sin())
}

impl MotionConfig {
    fn euler(&self, t: f64) -> ([f64; 3], [f64; 3]) {
        let r = sine(self.roll_amplitude, self.sway_period, 0.0, t);
        let p = sine(self.pitch_amplitude, self.sway_period, 0.5, t);
        let y = sine(self.yaw_amplitude, self.yaw_period, 0.0, t);
        ([r.0, p.0, y.0], [r.1, p.1, y.1])
    }

    /// Body rate from ZYX Euler angles and their rates.
    fn omega_b(&self, t: f64) -> Vec3 {
        let ([roll, pitch, _], [dr, dp, dy]) = self.euler(t);
        let (sr, cr) = roll.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        Vec3::new(dr - sp * dy, cr * dp + sr * cp * dy, -sr * dp + cr * cp * dy)
    }

    pub fn sample(&self, terrain: &Terrain, nominal_height: f64, t: f64) -> BaseSample {
        let height = self.base_height.unwrap_or(nominal_height);
        let x = self.speed * t;
        let (g, dg, ddg) = terrain.height(x);
        let y = sine(self.lateral_amplitude, self.lateral_period, 0.0, t);
        let z = sine(self.bob_amplitude, self.bob_period, 0.0, t);
        let position = Vec3::new(x, y.0, height + g + z.0);
        let velocity = Vec3::new(self.speed, y.1, dg * self.speed + z.1);
        let acceleration = Vec3::new(0.0, y.2, ddg * self.speed * self.speed + z.2);
        let ([roll, pitch, yaw], _) = self.euler(t);
        let h = 1e-5;
        let omega_dot_b = (self.omega_b(t + h) - self.omega_b(t - h)) / (2.0 * h);
        BaseSample {
            t,
            position,
            velocity,
            acceleration,
            attitude: UnitQuaternion::from_euler(roll, pitch, yaw),
            omega_b: self.omega_b(t),
            omega_dot_b,
        }
    }
}
