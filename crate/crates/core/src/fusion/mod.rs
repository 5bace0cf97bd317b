//! Position/velocity fusion and the event-driven estimation pipeline.
//!
//! The filter itself ([`filter`]) is linear given the attitude sequence: the
//! attitude estimate only enters through the rotation used to build the
//! input `u` and to express body-frame measurements in the navigation frame.

pub mod filter;
pub mod measurement;
pub mod pipeline;

use serde::{Deserialize, Serialize};

pub use filter::{predict, update, BaseState, Discretization, FusionInput, Measurement, NoiseConfig};
pub use measurement::{assemble_measurement, ExteroContext, ExteroOdometry, ExteroPose, ExteroTwist};
pub use pipeline::{run_threaded, Estimate, Pipeline, PipelineConfig, PipelineDiagnostics, SensorEvent};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub gravity: f64,
    /// Acceleration white noise density (m/s^2/sqrt(Hz)).
    pub sigma_accel: f64,
    /// Optional position random walk (m/sqrt(s)).
    pub sigma_position: f64,
    /// Leg-odometry velocity variances (m^2/s^2), body frame.
    pub r1: [f64; 3],
    /// Exteroceptive velocity variances (m^2/s^2), body frame.
    pub r2: [f64; 3],
    /// Exteroceptive position variances (m^2), navigation frame.
    pub r3: [f64; 3],
    pub discretization: Discretization,
    /// Constant exteroceptive delay compensated at fusion time (s).
    pub latency_shift: f64,
    /// Per-channel timestamp regression tolerated before dropping (s).
    pub out_of_order_tolerance: f64,
    /// Longest prediction step; longer IMU gaps are split.
    pub max_dt: f64,
    pub use_extero_twist: bool,
    pub use_extero_pose: bool,
    pub initial_sigma_position: f64,
    pub initial_sigma_velocity: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            gravity: 9.81,
            sigma_accel: 0.02,
            sigma_position: 0.0,
            r1: [0.01; 3],
            r2: [0.005; 3],
            r3: [0.01; 3],
            discretization: Discretization::PiecewiseConstant,
            latency_shift: 0.0,
            out_of_order_tolerance: 0.005,
            max_dt: 0.01,
            use_extero_twist: true,
            use_extero_pose: true,
            initial_sigma_position: 1e-3,
            initial_sigma_velocity: 0.1,
        }
    }
}

impl FusionConfig {
    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig::from_sigmas(self.sigma_accel, self.sigma_position, self.r1, self.r2, self.r3)
    }
}
