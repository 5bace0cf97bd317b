//! Slip detection and exteroceptive input switched on and off on the same
//! slippery runs. Median ATE over a handful of seeds.
//!
//! ```bash
//! cargo run --release --example ablation
//! ```

use muse::eval::{compute_ate, Pose};
use muse::fusion::{Pipeline, PipelineConfig};
use muse::sim::{generate, Platform, ScenarioConfig};

const SEEDS: u64 = 5;

fn main() -> muse::Result<()> {
    let platform = Platform::default();
    let logs = (0..SEEDS)
        .map(|seed| {
            let scenario = ScenarioConfig {
                seed,
                ..ScenarioConfig::slippery()
            };
            generate(&scenario, &platform)
        })
        .collect::<muse::Result<Vec<_>>>()?;

    for (name, proprioceptive_only, slip) in [
        ("full", false, true),
        ("no slip detection", false, false),
        ("proprioceptive", true, true),
        ("proprioceptive, no slip detection", true, false),
    ] {
        let mut ates = Vec::new();
        for log in &logs {
            let mut cfg = PipelineConfig::default();
            cfg.proprioceptive_only = proprioceptive_only;
            cfg.slip.enabled = slip;
            let est: Vec<Pose> = Pipeline::new(cfg).run(log.events()).iter().map(Pose::from).collect();
            let gt: Vec<Pose> = log.ground_truth().iter().map(Pose::from).collect();
            ates.push(compute_ate(&est, &gt, true)?.rmse);
        }
        ates.sort_by(f64::total_cmp);
        println!("{name:>34}: median ATE {:.3} m", ates[ates.len() / 2]);
    }
    Ok(())
}
