//! Cross-module checks: estimator components run on simulator output.

mod common;

use common::*;
use muse::attitude::{AttitudeConfig, AttitudeEstimator};
use muse::contact::{estimate_grf_quasi_static, ContactState};
use muse::fusion::{PipelineConfig, SensorEvent};
use muse::legodom::leg_odometry;
use muse::log::Record;
use muse::model::{RobotModel, NUM_JOINTS};
use muse::sim::{inject_slip, GroundTruthRecord, Platform, ScenarioConfig};
use muse::so3::Vec3;

fn truth_at(gt: &[GroundTruthRecord], t: f64) -> Option<&GroundTruthRecord> {
    gt.iter().find(|g| (g.t - t).abs() < 1e-9)
}

#[test]
fn leg_odometry_reproduces_base_velocity_without_noise() {
    let log = simulate(&ScenarioConfig::zero_noise());
    let gt = log.ground_truth();
    let model = RobotModel::aliengo();
    let mut sq = 0.0;
    let mut n = 0;
    for r in &log.records {
        let Record::Joints(js) = r else { continue };
        let Some(g) = truth_at(&gt, js.t) else { continue };
        let contact = ContactState {
            t: js.t,
            stance: g.stance,
        };
        let lo = leg_odometry(&model, js, &g.angular_velocity, &contact).unwrap();
        let v_b = g.attitude.inverse_rotate(&g.linear_velocity);
        sq += (lo.velocity - v_b).norm_squared();
        n += 1;
    }
    let rms = (sq / n as f64).sqrt();
    assert!(n > 5000);
    assert!(rms < 1e-3, "RMS {rms}");
}

#[test]
fn empty_slip_schedule_leaves_log_unchanged() {
    let s = ScenarioConfig {
        duration: 3.0,
        ..ScenarioConfig::default()
    };
    let p = Platform::default();
    let base = muse::sim::generate(&s, &p).unwrap();
    assert_eq!(inject_slip(&s, &p, &[]).unwrap().to_bytes(), base.to_bytes());
}

#[test]
fn torque_bias_shifts_the_estimated_forces() {
    let mut s = ScenarioConfig::zero_noise();
    s.duration = 1.0;
    let clean = simulate(&s);
    s.joint_noise.tau_bias = [0.5; NUM_JOINTS];
    let biased = simulate(&s);
    let model = RobotModel::aliengo();
    let gt = clean.ground_truth();
    let pairs = clean.records.iter().zip(&biased.records);
    let mut compared = 0;
    for (a, b) in pairs {
        let (Record::Joints(ja), Record::Joints(jb)) = (a, b) else { continue };
        assert!(jb.tau.iter().zip(&ja.tau).all(|(x, y)| (x - y - 0.5).abs() < 1e-12));
        let Some(g) = truth_at(&gt, ja.t) else { continue };
        let (fa, _) = estimate_grf_quasi_static(&model, ja, &g.attitude);
        let (fb, _) = estimate_grf_quasi_static(&model, jb, &g.attitude);
        assert!((fa.forces[0] - fb.forces[0]).norm() > 1.0);
        compared += 1;
    }
    assert!(compared > 50);
}

#[test]
fn pseudo_north_keeps_yaw_within_two_degrees_for_ten_minutes() {
    let s = ScenarioConfig {
        duration: 600.0,
        ..ScenarioConfig::default()
    };
    let log = simulate(&s);
    let gt = log.ground_truth();
    let r = estimate(&log, PipelineConfig::default());
    let mut worst: f64 = 0.0;
    for g in &gt {
        let e = &r.estimates[(g.t * 400.0).round() as usize];
        worst = worst.max(e.attitude.angle_to(&g.attitude).to_degrees());
    }
    assert!(worst < 2.0, "worst attitude error {worst} deg");
}

#[test]
fn attitude_filter_alone_tracks_tilt_on_simulated_imu() {
    let log = simulate(&ScenarioConfig {
        duration: 60.0,
        ..ScenarioConfig::default()
    });
    let gt = log.ground_truth();
    let cfg = AttitudeConfig {
        pseudo_north: false,
        ..AttitudeConfig::default()
    };
    let mut att = AttitudeEstimator::new(cfg, 9.81);
    let mut worst_tilt: f64 = 0.0;
    for e in log.events() {
        let SensorEvent::Imu(imu) = e else { continue };
        if !att.is_initialized() {
            let g = &gt[0];
            att.initialize(imu.t, g.attitude, imu.gyro);
        }
        let Some(state) = att.update(&imu) else { continue };
        if imu.t < 10.0 {
            continue;
        }
        if let Some(g) = truth_at(&gt, imu.t) {
            let up_est = state.q.rotate(&Vec3::z());
            let up_true = g.attitude.rotate(&Vec3::z());
            worst_tilt = worst_tilt.max(up_est.angle(&up_true).to_degrees());
        }
    }
    assert!(worst_tilt < 1.0, "tilt error {worst_tilt} deg");
}
