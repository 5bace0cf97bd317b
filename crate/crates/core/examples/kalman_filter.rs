//! One predict/update cycle of the base position and velocity filter, written
//! out by hand: IMU input, leg-odometry velocity and an exteroceptive position.
//!
//! ```bash
//! cargo run --example kalman_filter
//! ```

use muse::fusion::{predict, update, BaseState, Discretization, FusionInput, Measurement, NoiseConfig};
use muse::so3::{UnitQuaternion, Vec3};
use nalgebra::{DMatrix, DVector};

fn main() -> muse::Result<()> {
    let noise = NoiseConfig::default();
    let mut state = BaseState::new(0.0, Vec3::zeros(), Vec3::zeros(), 0.1, 0.1);
    let attitude = UnitQuaternion::from_euler(0.0, 0.0, 0.3);
    let dt = 0.0025;

    for k in 0..400 {
        // Standing still: the accelerometer reads +g along body up.
        let input = FusionInput::from_specific_force(&attitude, &Vec3::new(0.0, 0.0, 9.81), 9.81);
        state = predict(&state, &input, &noise.q, dt, Discretization::VanLoan);

        let mut z = vec![0.0; 3];
        let mut h = DMatrix::zeros(3, 6);
        let mut r = DMatrix::zeros(3, 3);
        h.view_mut((0, 3), (3, 3)).fill_with_identity();
        r.view_mut((0, 0), (3, 3)).copy_from(&noise.r1);
        if k % 40 == 39 {
            // Every 0.1 s an exteroceptive position fix arrives as well.
            z.extend([0.0, 0.0, 0.0]);
            h = h.resize_vertically(6, 0.0);
            h.view_mut((3, 0), (3, 3)).fill_with_identity();
            r = r.resize(6, 6, 0.0);
            r.view_mut((3, 3), (3, 3)).copy_from(&noise.r3);
        }
        let meas = Measurement {
            z: DVector::from_vec(z),
            h,
            r,
        };
        state = update(&state, &meas)?;
        if k % 100 == 99 {
            println!(
                "t {:.2}  sigma_p {:.4} m  sigma_v {:.4} m/s",
                state.t,
                state.p[(0, 0)].sqrt(),
                state.p[(3, 3)].sqrt()
            );
        }
    }
    Ok(())
}
