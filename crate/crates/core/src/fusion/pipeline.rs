//! Event-driven estimator. Every IMU sample is one tick: attitude step,
//! then the joint and exteroceptive samples received since the previous
//! tick, then prediction and one stacked correction. One estimate is
//! emitted per tick.

use std::sync::mpsc;
use std::thread;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use super::filter::{predict, update, BaseState, FusionInput};
use super::measurement::{assemble_measurement, extero_body_position, ExteroContext, ExteroOdometry, ExteroPose, ExteroTwist};
use super::{FusionConfig, NoiseConfig};
use crate::attitude::{attitude_from_gravity, pseudo_north, AttitudeConfig, AttitudeEstimator, ImuSample};
use crate::contact::{BaseMotion, ContactConfig, ContactEstimator, ContactState};
use crate::error::Error;
use crate::frames::{ExteroSensor, Extrinsics, RigidTransform};
use crate::legodom::{leg_odometry, DesiredFoot, FootKinematics, LegOdomMeasurement, SlipConfig, SlipDetector, SlipFlags};
use crate::linalg::{min_eigenvalue, project_psd};
use crate::model::{JointState, RobotModel, NUM_LEGS};
use crate::so3::{UnitQuaternion, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub enum SensorEvent {
    Imu(ImuSample),
    Joints(JointState),
    DesiredFoot(DesiredFoot),
    ExteroPose(ExteroPose),
    ExteroTwist(ExteroTwist),
}

impl SensorEvent {
    pub fn t(&self) -> f64 {
        match self {
            SensorEvent::Imu(s) => s.t,
            SensorEvent::Joints(s) => s.t,
            SensorEvent::DesiredFoot(s) => s.t,
            SensorEvent::ExteroPose(s) => s.t,
            SensorEvent::ExteroTwist(s) => s.t,
        }
    }

    pub fn channel(&self) -> &'static str {
        match self {
            SensorEvent::Imu(_) => "imu",
            SensorEvent::Joints(_) => "joints",
            SensorEvent::DesiredFoot(_) => "desired_foot",
            SensorEvent::ExteroPose(_) => "extero_pose",
            SensorEvent::ExteroTwist(_) => "extero_twist",
        }
    }

    fn slot(&self) -> usize {
        match self {
            SensorEvent::Imu(_) => 0,
            SensorEvent::Joints(_) => 1,
            SensorEvent::DesiredFoot(_) => 2,
            SensorEvent::ExteroPose(_) => 3,
            SensorEvent::ExteroTwist(_) => 4,
        }
    }

    fn is_finite(&self) -> bool {
        let v3 = |v: &Vec3| v.iter().all(|x| x.is_finite());
        self.t().is_finite()
            && match self {
                SensorEvent::Imu(s) => v3(&s.gyro) && v3(&s.accel),
                SensorEvent::Joints(s) => s.is_finite(),
                SensorEvent::DesiredFoot(s) => s.position.iter().chain(&s.velocity).all(v3),
                SensorEvent::ExteroPose(s) => v3(&s.position),
                SensorEvent::ExteroTwist(s) => v3(&s.linear) && v3(&s.angular),
            }
    }
}

/// Snapshot emitted at every IMU tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: UnitQuaternion,
    pub gyro_bias: Vec3,
    pub position_var: Vec3,
    pub velocity_var: Vec3,
    pub attitude_var: Vec3,
    pub stance: [bool; NUM_LEGS],
    pub slip: [bool; NUM_LEGS],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineDiagnostics {
    pub estimates: u64,
    pub out_of_order_dropped: u64,
    pub invalid_dropped: u64,
    pub no_stance_ticks: u64,
    pub singular_innovations: u64,
    pub psd_projections: u64,
    pub attitude_psd_projections: u64,
    pub stale_extero: u64,
    pub missing_references: u64,
    pub singular_legs: u64,
    pub extero_updates: u64,
    pub gated_accel: u64,
    /// Largest `| |q| - 1 |` seen at any tick.
    pub max_quaternion_norm_error: f64,
    /// Smallest covariance eigenvalue seen (only evaluated when Cholesky fails).
    pub min_covariance_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub model: RobotModel,
    pub extrinsics: Extrinsics,
    pub extero_sensor: ExteroSensor,
    pub contact: ContactConfig,
    pub slip: SlipConfig,
    pub attitude: AttitudeConfig,
    pub fusion: FusionConfig,
    /// Ignore every exteroceptive channel.
    pub proprioceptive_only: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            model: RobotModel::aliengo(),
            extrinsics: Extrinsics::default(),
            extero_sensor: ExteroSensor::default(),
            contact: ContactConfig::default(),
            slip: SlipConfig::default(),
            attitude: AttitudeConfig::default(),
            fusion: FusionConfig::default(),
            proprioceptive_only: false,
        }
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    noise: NoiseConfig,
    extero_extrinsic: RigidTransform,
    attitude: AttitudeEstimator,
    contact: ContactEstimator,
    slip: SlipDetector,
    state: Option<BaseState>,
    last_t: [f64; 5],
    buffer: Vec<SensorEvent>,
    pending_pose: Option<ExteroPose>,
    pending_twist: Option<ExteroTwist>,
    anchor: Option<Vec3>,
    yaw_from_extero: bool,
    last_u: Option<Vec3>,
    stance: ContactState,
    flags: SlipFlags,
    pub diagnostics: PipelineDiagnostics,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        let gravity = config.fusion.gravity;
        let mut model = config.model.clone();
        model.gravity = gravity;
        Self {
            noise: config.fusion.noise(),
            extero_extrinsic: *config.extrinsics.extero(config.extero_sensor),
            attitude: AttitudeEstimator::new(config.attitude.clone(), gravity),
            contact: ContactEstimator::new(model, config.contact.clone()),
            slip: SlipDetector::new(config.slip.clone()),
            state: None,
            last_t: [f64::NEG_INFINITY; 5],
            buffer: Vec::new(),
            pending_pose: None,
            pending_twist: None,
            anchor: None,
            yaw_from_extero: false,
            last_u: None,
            stance: ContactState {
                t: 0.0,
                stance: [false; NUM_LEGS],
            },
            flags: SlipFlags::none(0.0),
            diagnostics: PipelineDiagnostics::default(),
            config,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn base_state(&self) -> Option<&BaseState> {
        self.state.as_ref()
    }

    pub fn attitude(&self) -> &AttitudeEstimator {
        &self.attitude
    }

    /// Feeds one event; returns an estimate when the event is an IMU sample.
    pub fn push(&mut self, event: SensorEvent) -> Option<Estimate> {
        if !event.is_finite() {
            self.diagnostics.invalid_dropped += 1;
            return None;
        }
        let slot = event.slot();
        let t = event.t();
        if t < self.last_t[slot] - self.config.fusion.out_of_order_tolerance {
            self.diagnostics.out_of_order_dropped += 1;
            return None;
        }
        self.last_t[slot] = self.last_t[slot].max(t);
        match event {
            SensorEvent::Imu(imu) => self.tick(&imu),
            SensorEvent::ExteroPose(_) | SensorEvent::ExteroTwist(_) if self.config.proprioceptive_only => None,
            other => {
                self.buffer.push(other);
                None
            }
        }
    }

    /// Validates the ordering of an event without consuming it.
    pub fn check_order(&self, event: &SensorEvent) -> Result<(), Error> {
        let last = self.last_t[event.slot()];
        if event.t() < last - self.config.fusion.out_of_order_tolerance {
            return Err(Error::OutOfOrderEvent {
                channel: event.channel(),
                t: event.t(),
                last,
            });
        }
        Ok(())
    }

    pub fn run<I: IntoIterator<Item = SensorEvent>>(&mut self, events: I) -> Vec<Estimate> {
        events.into_iter().filter_map(|e| self.push(e)).collect()
    }

    fn tick(&mut self, imu_raw: &ImuSample) -> Option<Estimate> {
        let gravity = self.config.fusion.gravity;
        let imu = imu_raw.to_body(&self.config.extrinsics.imu);
        if !imu.is_valid(gravity) {
            self.diagnostics.invalid_dropped += 1;
            return None;
        }
        let ext = self.extero_extrinsic;

        // Exteroceptive samples feed the attitude filter before it steps.
        let events = std::mem::take(&mut self.buffer);
        for e in &events {
            match e {
                SensorEvent::ExteroPose(p) => {
                    self.attitude.push_pseudo_north(p.t, pseudo_north(&p.attitude, &ext));
                    self.pending_pose = Some(*p);
                }
                SensorEvent::ExteroTwist(tw) => self.pending_twist = Some(*tw),
                _ => {}
            }
        }

        if !self.attitude.is_initialized() {
            let yaw = match &self.pending_pose {
                Some(p) => {
                    self.yaw_from_extero = true;
                    ExteroOdometry { pose: *p, twist: None }.body_attitude(&ext).yaw()
                }
                None => 0.0,
            };
            let q0 = attitude_from_gravity(&imu.accel, yaw);
            self.attitude.initialize(imu.t, q0, imu.gyro);
        }
        let prior_projections = self.attitude.diagnostics.psd_projections;
        let att = self.attitude.update(&imu).unwrap_or(*self.attitude.state()?);
        let q = att.q;
        let omega_b = imu.gyro - att.bias;

        // Joint-rate samples: contact, slip and leg odometry.
        let mut leg_odom: Option<LegOdomMeasurement> = None;
        for e in &events {
            match e {
                SensorEvent::DesiredFoot(d) => self.slip.push_reference(d.clone()),
                SensorEvent::Joints(js) => {
                    let base = self.base_motion(&q, &omega_b);
                    let (_, contact) = self.contact.update(js, &q, &base);
                    self.stance = contact;
                    let feet = FootKinematics::from_joints(&self.contact_model(), js);
                    let (_, flags) = self.slip.detect(&feet, &contact);
                    self.flags = flags;
                    match leg_odometry(self.contact_model(), js, &omega_b, &contact) {
                        Ok(lo) => leg_odom = Some(lo),
                        Err(_) => self.diagnostics.no_stance_ticks += 1,
                    }
                }
                _ => {}
            }
        }
        if self.config.slip.drop_slipping_legs {
            leg_odom = leg_odom.and_then(|lo| self.drop_slipping(lo));
        }

        // First tick: anchor the navigation origin at the current base position.
        let sigma_v = if leg_odom.is_some() {
            self.config.fusion.initial_sigma_velocity
        } else {
            1.0
        };
        let mut state = match self.state {
            Some(s) => s,
            None => BaseState::new(
                imu.t,
                Vec3::zeros(),
                leg_odom.as_ref().map_or(Vec3::zeros(), |lo| q.rotate(&lo.velocity)),
                self.config.fusion.initial_sigma_position,
                sigma_v,
            ),
        };

        // Prediction with the trapezoidal mean of the navigation acceleration.
        let u_now = FusionInput::from_specific_force(&q, &imu.accel, gravity).u;
        let u = self.last_u.map_or(u_now, |u0| 0.5 * (u0 + u_now));
        self.last_u = Some(u_now);
        let dt_total = imu.t - state.t;
        if dt_total > 0.0 {
            let steps = (dt_total / self.config.fusion.max_dt).ceil().max(1.0) as usize;
            let dt = dt_total / steps as f64;
            for _ in 0..steps {
                state = predict(&state, &FusionInput { u }, &self.noise.q, dt, self.config.fusion.discretization);
            }
            state.t = imu.t;
        }

        // Exteroceptive odometry: yaw alignment and anchoring on first use.
        let mut odometry = None;
        if let Some(pose) = self.pending_pose.take() {
            let age = imu.t - pose.t;
            if age > self.config.attitude.stale_horizon {
                self.diagnostics.stale_extero += 1;
            } else {
                let twist = self.pending_twist.take().filter(|tw| (tw.t - pose.t).abs() <= 1e-6);
                let od = ExteroOdometry { pose, twist };
                if !self.yaw_from_extero {
                    let dyaw = od.body_attitude(&ext).yaw() - q.yaw();
                    self.attitude.rotate_yaw(dyaw);
                    state.rotate(&UnitQuaternion::from_euler(0.0, 0.0, dyaw).matrix());
                    self.yaw_from_extero = true;
                }
                odometry = Some(od);
            }
        }
        let q = self.attitude.state().map_or(q, |s| s.q);
        let mut extero_ctx = None;
        if let Some(od) = &odometry {
            let shift = state.velocity * self.config.fusion.latency_shift;
            let anchor = *self.anchor.get_or_insert_with(|| state.position - extero_body_position(&od.pose, &q, &ext) - shift);
            extero_ctx = Some(ExteroContext {
                odometry: od,
                extrinsic: &ext,
                anchor: anchor + shift,
                omega_b,
                use_twist: self.config.fusion.use_extero_twist,
                use_pose: self.config.fusion.use_extero_pose,
            });
        }

        if let Ok(meas) = assemble_measurement(
            leg_odom.as_ref(),
            extero_ctx.as_ref(),
            &q,
            &self.flags,
            self.config.slip.kappa,
            &self.noise,
        ) {
            match update(&state, &meas) {
                Ok(s) => {
                    state = s;
                    if extero_ctx.is_some() {
                        self.diagnostics.extero_updates += 1;
                    }
                }
                Err(_) => self.diagnostics.singular_innovations += 1,
            }
        }

        // Health: covariance must stay PSD.
        if Cholesky::new(state.p).is_none() {
            let min = min_eigenvalue(&state.p);
            self.diagnostics.min_covariance_eigenvalue = self.diagnostics.min_covariance_eigenvalue.min(min);
            if min < -1e-12 {
                state.p = project_psd(&state.p, 1e-12);
                self.diagnostics.psd_projections += 1;
            }
        }
        self.state = Some(state);

        let att = *self.attitude.state()?;
        self.diagnostics.attitude_psd_projections += self.attitude.diagnostics.psd_projections - prior_projections;
        self.diagnostics.gated_accel = self.attitude.diagnostics.gated_accel;
        self.diagnostics.stale_extero = self.diagnostics.stale_extero.max(self.attitude.diagnostics.stale_extero);
        self.diagnostics.missing_references = self.slip.missing_references;
        self.diagnostics.singular_legs = self.contact.singular_events;
        self.diagnostics.max_quaternion_norm_error =
            self.diagnostics.max_quaternion_norm_error.max((att.q.norm() - 1.0).abs());
        self.diagnostics.estimates += 1;
        Some(Estimate {
            t: imu.t,
            position: state.position,
            velocity: state.velocity,
            attitude: att.q,
            gyro_bias: att.bias,
            position_var: Vec3::new(state.p[(0, 0)], state.p[(1, 1)], state.p[(2, 2)]),
            velocity_var: Vec3::new(state.p[(3, 3)], state.p[(4, 4)], state.p[(5, 5)]),
            attitude_var: Vec3::new(att.p[(0, 0)], att.p[(1, 1)], att.p[(2, 2)]),
            stance: self.stance.stance,
            slip: self.flags.slipping,
        })
    }

    fn contact_model(&self) -> &RobotModel {
        &self.config.model
    }

    fn base_motion(&self, q: &UnitQuaternion, omega_b: &Vec3) -> BaseMotion {
        BaseMotion {
            linear_velocity: self.state.map_or(Vec3::zeros(), |s| s.velocity),
            angular_velocity: q.rotate(omega_b),
            linear_acceleration: self.last_u.unwrap_or_else(Vec3::zeros),
            angular_acceleration: Vec3::zeros(),
        }
    }

    /// Experimental: average only the non-slipping stance legs.
    fn drop_slipping(&self, lo: LegOdomMeasurement) -> Option<LegOdomMeasurement> {
        let mut keep = self.stance.stance;
        for i in 0..NUM_LEGS {
            keep[i] &= !self.flags.slipping[i];
        }
        crate::legodom::base_velocity(lo.t, &lo.contributions, &keep).ok()
    }
}

/// Runs the pipeline on a consumer thread fed through a bounded queue, so a
/// reader can stream events from disk while the filter runs.
pub fn run_threaded<I>(config: PipelineConfig, events: I, capacity: usize) -> (Vec<Estimate>, PipelineDiagnostics)
where
    I: IntoIterator<Item = SensorEvent> + Send,
    I::IntoIter: Send,
{
    let (tx, rx) = mpsc::sync_channel::<SensorEvent>(capacity.max(1));
    thread::scope(|scope| {
        scope.spawn(move || {
            for e in events {
                if tx.send(e).is_err() {
                    break;
                }
            }
        });
        let mut pipeline = Pipeline::new(config);
        let estimates: Vec<Estimate> = rx.iter().filter_map(|e| pipeline.push(e)).collect();
        (estimates, pipeline.diagnostics)
    })
}
