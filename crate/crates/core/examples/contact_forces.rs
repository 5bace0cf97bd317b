//! Ground reaction forces from joint torques, thresholded into stance flags,
//! and compared with the simulated gait schedule.
//!
//! ```bash
//! cargo run --release --example contact_forces
//! ```

use muse::contact::{contact_state, estimate_grf_quasi_static, ContactConfig};
use muse::log::Record;
use muse::model::{Leg, NUM_LEGS};
use muse::sim::{generate, Platform, ScenarioConfig};

fn main() -> muse::Result<()> {
    let scenario = ScenarioConfig {
        duration: 10.0,
        ..ScenarioConfig::default()
    };
    let platform = Platform::default();
    let log = generate(&scenario, &platform)?;
    let model = &platform.model;
    let f_min = ContactConfig::default().threshold(model);
    println!("stance threshold {f_min:.1} N for {:.1} kg", model.total_mass());

    let truth = log.ground_truth();
    let mut agree = [0usize; NUM_LEGS];
    let mut total = 0usize;
    let mut k = 0;
    for rec in &log.records {
        let Record::Joints(js) = rec else { continue };
        while k + 1 < truth.len() && truth[k + 1].t <= js.t {
            k += 1;
        }
        let gt = &truth[k];
        // The true attitude stands in for the estimator here.
        let (grf, _) = estimate_grf_quasi_static(model, js, &gt.attitude);
        let contact = contact_state(&grf, f_min);
        for i in 0..NUM_LEGS {
            agree[i] += usize::from(contact.stance[i] == gt.stance[i]);
        }
        total += 1;
        if total % 800 == 1 {
            let sum: f64 = grf.forces.iter().map(|f| f.z).sum();
            println!("t {:5.2}  stance {:?}  sum F_z {:6.1} N", js.t, contact.stance, sum);
        }
    }
    for leg in Leg::ALL {
        println!("{}: {:.1}% agreement with the gait schedule", leg.name(), 100.0 * agree[leg.index()] as f64 / total as f64);
    }
    Ok(())
}
