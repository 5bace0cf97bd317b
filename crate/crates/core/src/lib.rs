//! Multi-sensor state estimation for quadruped robots.
//!
//! The pipeline is split the same way the estimator runs on a robot:
//!
//! * [`contact`] turns joint torques into ground reaction forces and a per-leg
//!   stance flag.
//! * [`legodom`] derives base velocity from the stance legs and flags slipping
//!   feet, which inflates the leg-odometry covariance.
//! * [`attitude`] is a cascade: a globally convergent complementary observer
//!   provides the linearization point for an exogenous Kalman filter that fuses
//!   gyro, accelerometer and a pseudo-north vector derived from exteroceptive
//!   odometry.
//! * [`fusion`] is a linear time-varying Kalman filter on base position and
//!   velocity, driven by the IMU and corrected by leg odometry and
//!   exteroceptive pose/twist. [`fusion::Pipeline`] ties everything together.
//!
//! [`sim`] generates deterministic synthetic logs with ground truth and
//! [`eval`] scores estimates with ATE / RPE. All of them share the JSONL
//! format in [`log`] and the TOML configuration in [`config`].
//!
//! Conventions used everywhere: Hamilton quaternions stored w-first, rotating
//! body vectors into the navigation frame (`v_n = q * v_b`); navigation frame
//! z-up; body frame forward-left-up; joint order `[LF, RF, LH, RH] x [HAA, HFE, KFE]`.

pub mod attitude;
pub mod config;
pub mod contact;
pub mod error;
pub mod eval;
pub mod frames;
pub mod fusion;
pub mod legodom;
pub mod linalg;
pub mod log;
pub mod model;
pub mod sim;
pub mod so3;

pub use error::{Error, Result};
pub use so3::{RotationMatrix, UnitQuaternion};
