//! Forward kinematics, the analytic foot Jacobian and inverse kinematics for
//! both built-in robots.
//!
//! ```bash
//! cargo run --example kinematics
//! ```

use muse::model::{foot_jacobian, foot_position, inverse_kinematics, set_leg_slice, Leg, RobotModel, NUM_JOINTS};
use muse::so3::{Mat3, Vec3};

fn main() -> muse::Result<()> {
    for model in [RobotModel::aliengo(), RobotModel::anymal()] {
        println!("{} ({:.1} kg)", model.name, model.total_mass());

        // Stand on the nominal footholds.
        let mut q = [0.0; NUM_JOINTS];
        for leg in Leg::ALL {
            let ql = inverse_kinematics(&model, leg, &model.nominal_foot(leg))?;
            set_leg_slice(&mut q, leg, &ql);
        }

        for leg in Leg::ALL {
            let p = foot_position(&model, &q, leg);
            let j = foot_jacobian(&model, &q, leg);

            let h = 1e-6;
            let mut fd = Mat3::zeros();
            for c in 0..3 {
                let mut qp = q;
                let mut qm = q;
                qp[3 * leg.index() + c] += h;
                qm[3 * leg.index() + c] -= h;
                let col: Vec3 = (foot_position(&model, &qp, leg) - foot_position(&model, &qm, leg)) / (2.0 * h);
                fd.set_column(c, &col);
            }
            let rel = (j - fd).norm() / j.norm();
            println!(
                "  {}  foot [{:+.3} {:+.3} {:+.3}] m  |J - J_fd|/|J| = {:.1e}  sigma_min = {:.3}",
                leg.name(),
                p.x,
                p.y,
                p.z,
                rel,
                j.singular_values().min()
            );
        }
    }
    Ok(())
}
