#![allow(dead_code)]

use muse::config::Config;
use muse::eval::{evaluate, EvalReport, Pose};
use muse::fusion::{Estimate, Pipeline, PipelineConfig, PipelineDiagnostics};
use muse::log::StreamLog;
use muse::sim::{generate, Platform, ScenarioConfig};

pub struct Run {
    pub log: StreamLog,
    pub estimates: Vec<Estimate>,
    pub diagnostics: PipelineDiagnostics,
}

impl Run {
    pub fn report(&self, window: f64, align: bool) -> EvalReport {
        let est: Vec<Pose> = self.estimates.iter().map(Pose::from).collect();
        let gt: Vec<Pose> = self.log.ground_truth().iter().map(Pose::from).collect();
        evaluate(&est, &gt, window, align).expect("trajectories overlap")
    }

    pub fn ate(&self) -> f64 {
        self.report(1.0, true).ate.rmse
    }
}

pub fn simulate(scenario: &ScenarioConfig) -> StreamLog {
    generate(scenario, &Platform::default()).expect("scenario is valid")
}

pub fn estimate(log: &StreamLog, config: PipelineConfig) -> Run {
    let mut pipeline = Pipeline::new(config);
    let estimates = pipeline.run(log.events());
    Run {
        log: log.clone(),
        estimates,
        diagnostics: pipeline.diagnostics,
    }
}

pub fn run(scenario: &ScenarioConfig, config: PipelineConfig) -> Run {
    estimate(&simulate(scenario), config)
}

/// Simulator and estimator both set up from one configuration.
pub fn run_config(cfg: &Config) -> Run {
    let log = generate(&cfg.scenario, &cfg.platform().unwrap()).unwrap();
    estimate(&log, cfg.pipeline().unwrap())
}

pub fn shipped_config(name: &str) -> Config {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    Config::load(&path).unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
