//! Full estimator on a simulated run, scored against ground truth.
//!
//! ```bash
//! cargo run --release --example pipeline
//! ```

use muse::eval::{evaluate, Pose};
use muse::fusion::{Pipeline, PipelineConfig};
use muse::sim::{generate, Platform, ScenarioConfig};

fn main() -> muse::Result<()> {
    let log = generate(&ScenarioConfig::default(), &Platform::default())?;

    let mut pipeline = Pipeline::new(PipelineConfig::default());
    let estimates = pipeline.run(log.events());
    println!("{} estimates, {} extero updates", estimates.len(), pipeline.diagnostics.extero_updates);

    let last = estimates.last().expect("at least one estimate");
    println!(
        "final position [{:.3} {:.3} {:.3}] m, sigma_p {:.4} m",
        last.position.x,
        last.position.y,
        last.position.z,
        last.position_var.max().sqrt()
    );

    let est: Vec<Pose> = estimates.iter().map(Pose::from).collect();
    let gt: Vec<Pose> = log.ground_truth().iter().map(Pose::from).collect();
    print!("{}", evaluate(&est, &gt, 1.0, true)?.table());
    Ok(())
}
