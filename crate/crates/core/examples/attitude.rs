//! The attitude cascade recovering from a 30 degree roll error on simulated
//! IMU data. No exteroceptive input, so only tilt is observable.
//!
//! ```bash
//! cargo run --release --example attitude
//! ```

use muse::attitude::{AttitudeConfig, AttitudeEstimator};
use muse::log::Record;
use muse::sim::{generate, Platform, ScenarioConfig};
use muse::so3::UnitQuaternion;

fn main() -> muse::Result<()> {
    let scenario = ScenarioConfig {
        duration: 30.0,
        ..ScenarioConfig::default()
    };
    let platform = Platform::default();
    let log = generate(&scenario, &platform)?;
    let truth = log.ground_truth();
    let gravity = platform.model.gravity;

    let mut est = AttitudeEstimator::new(AttitudeConfig::default(), gravity);
    let q0 = UnitQuaternion::from_euler(30f64.to_radians(), 0.0, 0.0) * truth[0].attitude;
    let mut k = 0;
    let mut next_print = 0.0;
    for rec in &log.records {
        let Record::Imu(imu) = rec else { continue };
        if !est.is_initialized() {
            est.initialize(imu.t, q0, imu.gyro);
            continue;
        }
        let Some(state) = est.update(imu) else { continue };
        while k + 1 < truth.len() && truth[k + 1].t <= imu.t {
            k += 1;
        }
        if imu.t >= next_print {
            let (r, p, y) = state.q.euler();
            let (rg, pg, yg) = truth[k].attitude.euler();
            println!(
                "t {:5.1}  roll err {:+7.3}  pitch err {:+7.3}  yaw err {:+7.3} deg  bias_z {:+.5}",
                imu.t,
                (r - rg).to_degrees(),
                (p - pg).to_degrees(),
                (y - yg).to_degrees(),
                state.bias.z
            );
            next_print += 2.5;
        }
    }
    Ok(())
}
