//! Deterministic synthetic quadruped logs with ground truth.
//!
//! An analytic base trajectory and a periodic gait fix the world position of
//! every foot. Joint angles come from inverse kinematics of the body-relative
//! feet, joint rates from the inverse Jacobian, torques from quasi-static
//! statics with the body load shared equally by the stance legs. The IMU
//! reads the differentiated trajectory plus gravity, bias and noise, and
//! exteroceptive odometry is the true sensor pose with random-walk drift.
//!
//! Every noise source draws from its own ChaCha stream, so changing one
//! sensor's settings never perturbs another sensor's noise sequence.

pub mod gait;
pub mod motion;
pub mod sensors;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attitude::ImuSample;
use crate::error::{Error, Result};
use crate::frames::{ExteroSensor, Extrinsics};
use crate::legodom::DesiredFoot;
use crate::log::{LogHeader, Record, StreamLog};
use crate::model::{inverse_kinematics, leg_gravity_torques, leg_jacobian, set_leg_slice, JointState, Leg, RobotModel, NUM_LEGS};
use crate::so3::{UnitQuaternion, Vec3};

pub use gait::{FootSample, Gait, GaitPlan, SlipEvent};
pub use motion::{BaseSample, MotionConfig, Terrain};
pub use sensors::{synth_extero, ExteroModel, ImuNoise, JointNoise};

const STREAM_IMU: u64 = 1;
const STREAM_JOINTS: u64 = 2;
const STREAM_EXTERO: u64 = 3;
const STREAM_SLIP: u64 = 4;

/// True state of the robot at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub t: f64,
    pub position: Vec3,
    pub attitude: UnitQuaternion,
    /// World frame.
    pub linear_velocity: Vec3,
    /// Body frame.
    pub angular_velocity: Vec3,
    /// World frame.
    pub feet: [Vec3; NUM_LEGS],
    pub stance: [bool; NUM_LEGS],
    pub slip: [bool; NUM_LEGS],
}

/// Window in which stance feet of the listed legs may slip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlipperyPatch {
    pub t_start: f64,
    pub t_end: f64,
    /// Chance that a stance phase starting inside the window slips.
    pub probability: f64,
    pub speed: f64,
    pub duration: f64,
    pub legs: Vec<Leg>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Rates {
    pub imu: f64,
    pub joints: f64,
    pub ground_truth: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            imu: 400.0,
            joints: 400.0,
            ground_truth: 100.0,
        }
    }
}

/// Robot and sensor mounting used by the generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Platform {
    pub model: RobotModel,
    pub extrinsics: Extrinsics,
    pub extero_sensor: ExteroSensor,
}

impl Default for Platform {
    fn default() -> Self {
        Self {
            model: RobotModel::aliengo(),
            extrinsics: Extrinsics::default(),
            extero_sensor: ExteroSensor::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration: f64,
    pub gait: Gait,
    /// Gait cycle length; the gait's default when absent.
    pub gait_period: Option<f64>,
    pub swing_height: f64,
    pub motion: MotionConfig,
    pub terrain: Terrain,
    pub slippery: Vec<SlipperyPatch>,
    pub slips: Vec<SlipEvent>,
    pub rates: Rates,
    pub imu_noise: ImuNoise,
    pub joint_noise: JointNoise,
    pub extero: ExteroModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration: 60.0,
            gait: Gait::Crawl,
            gait_period: None,
            swing_height: 0.08,
            motion: MotionConfig::default(),
            terrain: Terrain::Flat,
            slippery: Vec::new(),
            slips: Vec::new(),
            rates: Rates::default(),
            imu_noise: ImuNoise::default(),
            joint_noise: JointNoise::default(),
            extero: ExteroModel::default(),
        }
    }
}

impl ScenarioConfig {
    /// Every sensor ideal; straight walk with yaw oscillation, so the base
    /// never accelerates and gravity is the only specific force.
    pub fn zero_noise() -> Self {
        Self {
            motion: MotionConfig {
                lateral_amplitude: 0.0,
                ..MotionConfig::default()
            },
            imu_noise: ImuNoise::ideal(),
            joint_noise: JointNoise::ideal(),
            extero: ExteroModel::ideal(None),
            ..Self::default()
        }
    }

    /// Front feet may slip while crossing a slippery stretch.
    pub fn slippery() -> Self {
        Self {
            slippery: vec![SlipperyPatch {
                t_start: 15.0,
                t_end: 45.0,
                probability: 0.6,
                speed: 0.3,
                duration: 0.3,
                legs: vec![Leg::LF, Leg::RF],
            }],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.duration > 0.0) {
            return bad(format!("scenario duration must be positive, got {}", self.duration));
        }
        for (name, r) in [
            ("imu", self.rates.imu),
            ("joints", self.rates.joints),
            ("ground_truth", self.rates.ground_truth),
        ] {
            if !(r > 0.0) {
                return bad(format!("{name} rate must be positive, got {r}"));
            }
        }
        if self.extero.enabled && !(self.extero.rate > 0.0 && self.extero.rate <= self.rates.imu) {
            return bad(format!("extero rate must be in (0, imu rate], got {}", self.extero.rate));
        }
        if self.extero.latency < 0.0 {
            return bad("extero latency must be nonnegative".into());
        }
        let within = |a: f64, b: f64| a >= 0.0 && b > a && b <= self.duration;
        for s in &self.slips {
            if !within(s.t_start, s.t_end) {
                return bad(format!("slip window [{}, {}] is outside the scenario", s.t_start, s.t_end));
            }
        }
        for p in &self.slippery {
            if !within(p.t_start, p.t_end) || !(0.0..=1.0).contains(&p.probability) || !(p.duration > 0.0) {
                return bad(format!("invalid slippery patch [{}, {}]", p.t_start, p.t_end));
            }
        }
        Ok(())
    }

    /// Gait plan with scheduled and randomly drawn slips resolved.
    pub fn plan(&self, model: &RobotModel) -> Result<GaitPlan> {
        let mut plan = GaitPlan::new(
            model.clone(),
            self.motion.clone(),
            self.terrain.clone(),
            self.gait,
            self.gait_period,
            self.swing_height,
        )?;
        for s in &self.slips {
            plan.add_slip(s)?;
        }
        let mut rng = stream(self.seed, STREAM_SLIP);
        for patch in &self.slippery {
            for &leg in &patch.legs {
                let (k0, _) = plan.cycle(leg, patch.t_start);
                let (k1, _) = plan.cycle(leg, patch.t_end);
                for k in k0..=k1 {
                    let (s0, s1) = plan.stance_interval(leg, k);
                    let draw: f64 = rng.random();
                    let offset: f64 = rng.random();
                    if s0 < patch.t_start || s0 >= patch.t_end || draw >= patch.probability {
                        continue;
                    }
                    // Slip starts in the first half of stance, ends before lift-off.
                    let start = s0 + (0.1 + 0.4 * offset) * (s1 - s0);
                    let end = (start + patch.duration).min(s1 - 0.02 * (s1 - s0)).min(self.duration);
                    if end > start {
                        plan.add_slip(&SlipEvent {
                            leg,
                            t_start: start,
                            t_end: end,
                            speed: patch.speed,
                            direction: None,
                        })?;
                    }
                }
            }
        }
        Ok(plan)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn grid(rate: f64, duration: f64) -> impl Iterator<Item = f64> {
    let n = (duration * rate + 1e-9).floor() as u64;
    (0..=n).map(move |k| k as f64 / rate)
}

/// Foot relative to the base, body frame, and its body-frame rate.
fn body_relative(base: &BaseSample, foot: &FootSample) -> (Vec3, Vec3) {
    let x = base.attitude.inverse_rotate(&(foot.position - base.position));
    let xd = base.attitude.inverse_rotate(&(foot.velocity - base.velocity)) - base.omega_b.cross(&x);
    (x, xd)
}

/// Noise-free joint state consistent with the plan at `t`.
pub fn joint_state(plan: &GaitPlan, t: f64) -> Result<JointState> {
    let model = &plan.model;
    let base = plan.base(t);
    let feet = Leg::ALL.map(|leg| plan.foot(leg, t, true));
    let n_stance = feet.iter().filter(|f| f.stance).count();
    let load = (base.acceleration + Vec3::new(0.0, 0.0, model.gravity)) * model.total_mass();
    let load_b = base.attitude.inverse_rotate(&load) / n_stance.max(1) as f64;
    let mut js = JointState::zeros(t);
    for leg in Leg::ALL {
        let foot = &feet[leg.index()];
        let (x, xd) = body_relative(&base, foot);
        let ql = inverse_kinematics(model, leg, &x)
            .map_err(|e| Error::InfeasibleGait(format!("t = {t:.4}: {e}")))?;
        let j = leg_jacobian(model, leg, &ql);
        let qd = j.try_inverse().ok_or_else(|| {
            Error::InfeasibleGait(format!("t = {t:.4}: {} leg Jacobian is singular", leg.name()))
        })? * xd;
        let mut tau = leg_gravity_torques(model, &base.attitude, leg, &ql);
        if foot.stance {
            tau -= j.transpose() * load_b;
        }
        set_leg_slice(&mut js.q, leg, &ql);
        set_leg_slice(&mut js.qd, leg, &qd);
        set_leg_slice(&mut js.tau, leg, &tau);
    }
    Ok(js)
}

/// Controller reference: the slip-free plan, relative to the true base.
pub fn desired_foot(plan: &GaitPlan, t: f64) -> DesiredFoot {
    let base = plan.base(t);
    let mut position = [Vec3::zeros(); NUM_LEGS];
    let mut velocity = [Vec3::zeros(); NUM_LEGS];
    for leg in Leg::ALL {
        let (x, xd) = body_relative(&base, &plan.foot(leg, t, false));
        position[leg.index()] = x;
        velocity[leg.index()] = xd;
    }
    DesiredFoot { t, position, velocity }
}

pub fn ground_truth(plan: &GaitPlan, t: f64) -> GroundTruthRecord {
    let base = plan.base(t);
    let feet = Leg::ALL.map(|leg| plan.foot(leg, t, true));
    GroundTruthRecord {
        t,
        position: base.position,
        attitude: base.attitude,
        linear_velocity: base.velocity,
        angular_velocity: base.omega_b,
        feet: feet.map(|f| f.position),
        stance: feet.map(|f| f.stance),
        slip: feet.map(|f| f.slipping),
    }
}

/// Ideal IMU reading (IMU frame) at the mounting point.
pub fn ideal_imu(base: &BaseSample, platform: &Platform) -> ImuSample {
    let mount = &platform.extrinsics.imu;
    let r = mount.translation;
    let w = base.omega_b;
    let f_b = base.attitude.inverse_rotate(&(base.acceleration + Vec3::new(0.0, 0.0, platform.model.gravity)))
        + base.omega_dot_b.cross(&r)
        + w.cross(&w.cross(&r));
    ImuSample {
        t: base.t,
        gyro: mount.rotation.inverse_rotate(&w),
        accel: mount.rotation.inverse_rotate(&f_b),
    }
}

/// Runs the scenario and returns a sorted log with every channel.
pub fn generate(scenario: &ScenarioConfig, platform: &Platform) -> Result<StreamLog> {
    scenario.validate()?;
    platform.model.validate()?;
    let plan = scenario.plan(&platform.model)?;
    let duration = scenario.duration;
    let mut log = StreamLog::new(LogHeader {
        seed: Some(scenario.seed),
        ..LogHeader::new("simulate", &platform.model.name, platform.extero_sensor)
    });

    for t in grid(scenario.rates.ground_truth, duration) {
        log.records.push(Record::GroundTruth(ground_truth(&plan, t)));
    }

    let jn = &scenario.joint_noise;
    let mut rng = stream(scenario.seed, STREAM_JOINTS);
    for t in grid(scenario.rates.joints, duration) {
        let mut js = joint_state(&plan, t)?;
        for i in 0..js.q.len() {
            js.q[i] += jn.q_bias[i] + sensors::gaussian(&mut rng, jn.q);
            js.qd[i] += sensors::gaussian(&mut rng, jn.qd);
            js.tau[i] += jn.tau_bias[i] + sensors::gaussian(&mut rng, jn.tau);
        }
        log.records.push(Record::DesiredFoot(desired_foot(&plan, t)));
        log.records.push(Record::Joints(js));
    }

    let imu = &scenario.imu_noise;
    let rate = scenario.rates.imu;
    let dt = 1.0 / rate;
    let mut rng = stream(scenario.seed, STREAM_IMU);
    let mut bg = Vec3::from(imu.gyro_bias);
    let mut ba = Vec3::from(imu.accel_bias);
    for t in grid(rate, duration) {
        let mut s = ideal_imu(&plan.base(t), platform);
        s.gyro += bg + sensors::gaussian3(&mut rng, imu.gyro_density * rate.sqrt());
        s.accel += ba + sensors::gaussian3(&mut rng, imu.accel_density * rate.sqrt());
        bg += sensors::gaussian3(&mut rng, imu.gyro_bias_walk * dt.sqrt());
        ba += sensors::gaussian3(&mut rng, imu.accel_bias_walk * dt.sqrt());
        log.records.push(Record::Imu(s));
    }

    let mut extero = scenario.extero.clone();
    extero.twist = Some(extero.twist.unwrap_or(platform.extero_sensor == ExteroSensor::Camera));
    let mut rng = stream(scenario.seed, STREAM_EXTERO);
    let ext = platform.extrinsics.extero(platform.extero_sensor);
    for (pose, twist) in synth_extero(|t| plan.base(t), ext, &extero, duration, &mut rng) {
        log.records.push(Record::ExteroPose(pose));
        if let Some(tw) = twist {
            log.records.push(Record::ExteroTwist(tw));
        }
    }

    log.sort();
    Ok(log)
}

/// Regenerates the scenario with additional scheduled slips. Joint
/// trajectories are re-solved against the displaced feet; every other
/// channel and noise sequence is unchanged.
pub fn inject_slip(scenario: &ScenarioConfig, platform: &Platform, schedule: &[SlipEvent]) -> Result<StreamLog> {
    let mut s = scenario.clone();
    s.slips.extend_from_slice(schedule);
    generate(&s, platform)
}
