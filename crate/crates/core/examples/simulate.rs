//! Generate a synthetic log and write it as JSONL.
//!
//! ```bash
//! cargo run --release --example simulate -- /tmp/run.jsonl
//! ```

use std::path::PathBuf;

use muse::sim::{generate, Gait, Platform, ScenarioConfig};

fn main() -> muse::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("muse_simulate.jsonl"));

    let scenario = ScenarioConfig {
        gait: Gait::Trot,
        duration: 20.0,
        seed: 7,
        ..ScenarioConfig::default()
    };
    let log = generate(&scenario, &Platform::default())?;
    for channel in ["imu", "joints", "desired_foot", "extero_pose", "extero_twist", "ground_truth"] {
        println!("{channel:>13}: {}", log.count(channel));
    }
    log.write(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
