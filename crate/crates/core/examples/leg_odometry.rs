//! Body velocity from stance-leg kinematics, and slip detection against the
//! controller's desired foot trajectory on a slippery patch.
//!
//! ```bash
//! cargo run --release --example leg_odometry
//! ```

use muse::contact::ContactState;
use muse::legodom::{leg_odometry, FootKinematics, SlipConfig, SlipDetector};
use muse::log::Record;
use muse::model::NUM_LEGS;
use muse::sim::{generate, Platform, ScenarioConfig};

fn main() -> muse::Result<()> {
    let scenario = ScenarioConfig::slippery();
    let platform = Platform::default();
    let model = &platform.model;
    let log = generate(&scenario, &platform)?;
    let truth = log.ground_truth();

    let mut detector = SlipDetector::new(SlipConfig::default());
    let mut k = 0;
    let mut sq = 0.0;
    let mut n = 0usize;
    let (mut hits, mut flagged, mut slipping) = (0usize, 0usize, 0usize);
    for rec in &log.records {
        match rec {
            Record::DesiredFoot(d) => detector.push_reference(d.clone()),
            Record::Joints(js) => {
                while k + 1 < truth.len() && truth[k + 1].t <= js.t {
                    k += 1;
                }
                let gt = &truth[k];
                // Ground-truth stance and body rates isolate the kinematic part.
                let contact = ContactState { t: js.t, stance: gt.stance };
                let Ok(lo) = leg_odometry(model, js, &gt.angular_velocity, &contact) else { continue };
                let v_true = gt.attitude.inverse_rotate(&gt.linear_velocity);
                sq += (lo.velocity - v_true).norm_squared();
                n += 1;

                let (_, flags) = detector.detect(&FootKinematics::from_joints(model, js), &contact);
                for i in 0..NUM_LEGS {
                    hits += usize::from(flags.slipping[i] && gt.slip[i]);
                    flagged += usize::from(flags.slipping[i]);
                    slipping += usize::from(gt.slip[i]);
                }
            }
            _ => {}
        }
    }
    println!("leg odometry RMS error {:.4} m/s over {n} joint samples", (sq / n as f64).sqrt());
    println!("slipping samples {slipping}, flagged {flagged}, flagged while slipping {hits}");
    Ok(())
}
