//! Periodic gait plan: footholds, swing trajectories and scheduled slips.

use serde::{Deserialize, Serialize};

use super::motion::{smoothstep, BaseSample, MotionConfig, Terrain};
use crate::error::{Error, Result};
use crate::model::{Leg, RobotModel, NUM_LEGS};
use crate::so3::Vec3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gait {
    /// One leg in swing at a time (three- or four-leg support).
    #[default]
    Crawl,
    /// Diagonal pairs (two-leg support).
    Trot,
}

impl Gait {
    /// Phase offsets in `[LF, RF, LH, RH]` order.
    pub fn offsets(self) -> [f64; NUM_LEGS] {
        match self {
            Gait::Crawl => [0.0, 0.5, 0.75, 0.25],
            Gait::Trot => [0.0, 0.5, 0.5, 0.0],
        }
    }

    pub fn duty(self) -> f64 {
        match self {
            Gait::Crawl => 0.8,
            Gait::Trot => 0.6,
        }
    }

    pub fn default_period(self) -> f64 {
        match self {
            Gait::Crawl => 1.0,
            Gait::Trot => 0.6,
        }
    }
}

/// Scheduled slip of one stance foot. Without a direction the foot slides
/// horizontally toward the base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlipEvent {
    pub leg: Leg,
    pub t_start: f64,
    pub t_end: f64,
    /// Slip speed (m/s).
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
}

/// Slip resolved onto one stance phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolvedSlip {
    pub leg: Leg,
    pub cycle: i64,
    pub start: f64,
    pub end: f64,
    pub velocity: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FootSample {
    /// World frame.
    pub position: Vec3,
    pub velocity: Vec3,
    pub stance: bool,
    pub slipping: bool,
}

#[derive(Clone, Debug)]
pub struct GaitPlan {
    pub model: RobotModel,
    pub motion: MotionConfig,
    pub terrain: Terrain,
    pub gait: Gait,
    pub period: f64,
    pub duty: f64,
    pub swing_height: f64,
    slips: Vec<ResolvedSlip>,
}

impl GaitPlan {
    pub fn new(
        model: RobotModel,
        motion: MotionConfig,
        terrain: Terrain,
        gait: Gait,
        period: Option<f64>,
        swing_height: f64,
    ) -> Result<Self> {
        let period = period.unwrap_or(gait.default_period());
        if !(period > 0.0) {
            return Err(Error::InfeasibleGait(format!("gait period must be positive, got {period}")));
        }
        Ok(Self {
            model,
            motion,
            terrain,
            gait,
            period,
            duty: gait.duty(),
            swing_height,
            slips: Vec::new(),
        })
    }

    pub fn base(&self, t: f64) -> BaseSample {
        self.motion.sample(&self.terrain, self.model.nominal_height, t)
    }

    /// Cycle index and start time of the cycle containing `t`.
    pub fn cycle(&self, leg: Leg, t: f64) -> (i64, f64) {
        let off = self.gait.offsets()[leg.index()];
        let k = (t / self.period + off).floor() as i64;
        (k, (k as f64 - off) * self.period)
    }

    pub fn stance_interval(&self, leg: Leg, cycle: i64) -> (f64, f64) {
        let off = self.gait.offsets()[leg.index()];
        let t0 = (cycle as f64 - off) * self.period;
        (t0, t0 + self.duty * self.period)
    }

    pub fn is_stance(&self, leg: Leg, t: f64) -> bool {
        let (k, _) = self.cycle(leg, t);
        t < self.stance_interval(leg, k).1
    }

    /// Nominal foothold of a stance phase: the nominal foot under the base at
    /// mid-stance, dropped onto the terrain.
    pub fn foothold(&self, leg: Leg, cycle: i64) -> Vec3 {
        let (t0, t1) = self.stance_interval(leg, cycle);
        let b = self.base(0.5 * (t0 + t1));
        let mut nominal = self.model.nominal_foot(leg);
        nominal.z = 0.0;
        let p = b.position + b.attitude.rotate(&nominal);
        Vec3::new(p.x, p.y, self.terrain.height(p.x).0)
    }

    pub fn slips(&self) -> &[ResolvedSlip] {
        &self.slips
    }

    /// Attaches a slip to the stance phase containing its start.
    pub fn add_slip(&mut self, event: &SlipEvent) -> Result<()> {
        let (k, _) = self.cycle(event.leg, event.t_start);
        let (_, t1) = self.stance_interval(event.leg, k);
        if event.t_start >= t1 {
            return Err(Error::InfeasibleGait(format!(
                "slip on {} at t = {} starts during swing",
                event.leg.name(),
                event.t_start
            )));
        }
        let end = event.t_end.min(t1);
        if !(end > event.t_start) || !(event.speed >= 0.0) {
            return Err(Error::InfeasibleGait(format!("empty slip window on {}", event.leg.name())));
        }
        let dir = match event.direction {
            Some(d) => Vec3::from(d),
            None => {
                let hold = self.foothold(event.leg, k);
                let base = self.base(event.t_start).position;
                Vec3::new(base.x - hold.x, base.y - hold.y, 0.0)
            }
        };
        let n = dir.norm();
        if n < 1e-12 {
            return Err(Error::InfeasibleGait("slip direction is zero".into()));
        }
        self.slips.push(ResolvedSlip {
            leg: event.leg,
            cycle: k,
            start: event.t_start,
            end,
            velocity: dir * (event.speed / n),
        });
        Ok(())
    }

    /// Slip displacement accumulated within one stance phase by time `t`.
    fn slip_displacement(&self, leg: Leg, cycle: i64, t: f64) -> (Vec3, Vec3, bool) {
        let mut d = Vec3::zeros();
        let mut v = Vec3::zeros();
        let mut active = false;
        for s in self.slips.iter().filter(|s| s.leg == leg && s.cycle == cycle) {
            let tau = t.clamp(s.start, s.end) - s.start;
            d += s.velocity * tau;
            if t > s.start && t < s.end {
                v += s.velocity;
                active = true;
            }
        }
        (d, v, active)
    }

    /// World-frame foot state; `with_slip = false` gives the controller's plan.
    pub fn foot(&self, leg: Leg, t: f64, with_slip: bool) -> FootSample {
        let (k, _) = self.cycle(leg, t);
        let (_, t1) = self.stance_interval(leg, k);
        let hold = self.foothold(leg, k);
        if t < t1 {
            let (d, v, active) = if with_slip {
                self.slip_displacement(leg, k, t)
            } else {
                (Vec3::zeros(), Vec3::zeros(), false)
            };
            return FootSample {
                position: hold + d,
                velocity: v,
                stance: true,
                slipping: active,
            };
        }
        let lift = if with_slip {
            hold + self.slip_displacement(leg, k, t1).0
        } else {
            hold
        };
        let touch = self.foothold(leg, k + 1);
        let swing = (1.0 - self.duty) * self.period;
        let s = (t - t1) / swing;
        let (sig, dsig, _) = smoothstep(s);
        let bump = 64.0 * s.powi(3) * (1.0 - s).powi(3);
        let dbump = 64.0 * 3.0 * s * s * (1.0 - s) * (1.0 - s) * (1.0 - 2.0 * s);
        let delta = touch - lift;
        FootSample {
            position: lift + delta * sig + Vec3::z() * self.swing_height * bump,
            velocity: (delta * dsig + Vec3::z() * self.swing_height * dbump) / swing,
            stance: false,
            slipping: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(gait: Gait) -> GaitPlan {
        GaitPlan::new(RobotModel::aliengo(), MotionConfig::default(), Terrain::Flat, gait, None, 0.08).unwrap()
    }

    #[test]
    fn stance_counts() {
        let crawl = plan(Gait::Crawl);
        let trot = plan(Gait::Trot);
        for i in 0..1000 {
            let t = i as f64 * 0.00713;
            let n = Leg::ALL.iter().filter(|l| crawl.is_stance(**l, t)).count();
            assert!(n == 3 || n == 4, "crawl {n} at {t}");
            let n = Leg::ALL.iter().filter(|l| trot.is_stance(**l, t)).count();
            assert!(n == 2 || n == 4, "trot {n} at {t}");
        }
    }

    #[test]
    fn feet_are_continuous_and_pinned_in_stance() {
        let p = plan(Gait::Crawl);
        let h = 1e-6;
        for leg in Leg::ALL {
            for i in 0..500 {
                let t = 0.013 * i as f64;
                let f = p.foot(leg, t, true);
                let a = p.foot(leg, t - h, true);
                let b = p.foot(leg, t + h, true);
                assert!((b.position - a.position).norm() < 1e-5, "jump at {t}");
                if f.stance && a.stance && b.stance {
                    assert!((b.position - a.position).norm() < 1e-12);
                } else if !a.stance && !b.stance {
                    let fd = (b.position - a.position) / (2.0 * h);
                    assert!((fd - f.velocity).norm() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn slip_displaces_foot_by_speed_times_duration() {
        let mut p = plan(Gait::Crawl);
        let (t0, _) = p.stance_interval(Leg::LF, 2);
        p.add_slip(&SlipEvent {
            leg: Leg::LF,
            t_start: t0 + 0.1,
            t_end: t0 + 0.6,
            speed: 0.2,
            direction: None,
        })
        .unwrap();
        let before = p.foot(Leg::LF, t0 + 0.05, true).position;
        let after = p.foot(Leg::LF, t0 + 0.7, true);
        assert!(after.stance && !after.slipping);
        assert!(((after.position - before).norm() - 0.1).abs() < 1e-12);
        assert!(p.foot(Leg::LF, t0 + 0.3, true).slipping);
        // The plan without slip stays on the foothold.
        assert_eq!(p.foot(Leg::LF, t0 + 0.7, false).position, before);
    }

    #[test]
    fn slip_in_swing_is_rejected() {
        let mut p = plan(Gait::Crawl);
        let (_, t1) = p.stance_interval(Leg::RF, 3);
        let r = p.add_slip(&SlipEvent {
            leg: Leg::RF,
            t_start: t1 + 0.05,
            t_end: t1 + 0.1,
            speed: 0.2,
            direction: None,
        });
        assert!(matches!(r, Err(Error::InfeasibleGait(_))));
    }
}
