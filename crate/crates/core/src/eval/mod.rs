//! Trajectory metrics: rigid alignment, absolute trajectory error and
//! relative pose error over ground-truth path length.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::RigidTransform;
use crate::fusion::Estimate;
use crate::sim::GroundTruthRecord;
use crate::so3::{RotationMatrix, UnitQuaternion, Vec3};

/// Nearest-timestamp association tolerance (s).
pub const ASSOCIATION_TOLERANCE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub t: f64,
    pub position: Vec3,
    pub attitude: UnitQuaternion,
}

impl Pose {
    pub fn transformed(&self, tf: &RigidTransform) -> Pose {
        Pose {
            t: self.t,
            position: tf.transform_point(&self.position),
            attitude: tf.rotation * self.attitude,
        }
    }
}

impl From<&Estimate> for Pose {
    fn from(e: &Estimate) -> Self {
        Pose {
            t: e.t,
            position: e.position,
            attitude: e.attitude,
        }
    }
}

impl From<&GroundTruthRecord> for Pose {
    fn from(g: &GroundTruthRecord) -> Self {
        Pose {
            t: g.t,
            position: g.position,
            attitude: g.attitude,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub rmse: f64,
    pub max: f64,
    pub count: usize,
}

impl Stats {
    pub fn from_samples(samples: &[f64]) -> Stats {
        if samples.is_empty() {
            return Stats::default();
        }
        let n = samples.len() as f64;
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 {
            0.5 * (sorted[mid - 1] + sorted[mid])
        } else {
            sorted[mid]
        };
        Stats {
            mean: samples.iter().sum::<f64>() / n,
            median,
            rmse: (samples.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
            max: sorted[sorted.len() - 1],
            count: samples.len(),
        }
    }
}

/// Pairs every ground-truth pose with the nearest estimate within `tolerance`.
/// Both inputs must be sorted by time.
pub fn associate(est: &[Pose], gt: &[Pose], tolerance: f64) -> Vec<(Pose, Pose)> {
    let mut pairs = Vec::new();
    if est.is_empty() {
        return pairs;
    }
    for g in gt {
        let i = est.partition_point(|e| e.t < g.t);
        let best = [i.checked_sub(1), (i < est.len()).then_some(i)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (est[a].t - g.t).abs().total_cmp(&(est[b].t - g.t).abs()));
        if let Some(j) = best {
            if (est[j].t - g.t).abs() <= tolerance {
                pairs.push((est[j], *g));
            }
        }
    }
    pairs
}

fn rmse_of(pairs: &[(Pose, Pose)], tf: &RigidTransform) -> f64 {
    let s: f64 = pairs
        .iter()
        .map(|(e, g)| (tf.transform_point(&e.position) - g.position).norm_squared())
        .sum();
    (s / pairs.len() as f64).sqrt()
}

/// Least-squares rigid transform (rotation and translation, no scale) mapping
/// estimated positions onto ground truth, from associated pairs.
pub fn align_pairs(pairs: &[(Pose, Pose)]) -> Result<RigidTransform> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientOverlap(format!(
            "{} associated poses, at least 3 needed",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let ce = pairs.iter().map(|(e, _)| e.position).sum::<Vec3>() / n;
    let cg = pairs.iter().map(|(_, g)| g.position).sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (e, g) in pairs {
        h += (e.position - ce) * (g.position - cg).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    let rotation = RotationMatrix::new(r)
        .map(|r| UnitQuaternion::from_rotation_matrix(&r))
        .ok_or_else(|| Error::InsufficientOverlap("degenerate alignment".into()))?;
    let tf = RigidTransform::new(rotation, cg - rotation.rotate(&ce));
    // Identity is the exact minimizer when it already fits at least as well.
    let identity = RigidTransform::identity();
    if rmse_of(pairs, &identity) <= rmse_of(pairs, &tf) {
        return Ok(identity);
    }
    Ok(tf)
}

pub fn align_se3(est: &[Pose], gt: &[Pose]) -> Result<RigidTransform> {
    align_pairs(&associate(est, gt, ASSOCIATION_TOLERANCE))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AteResult {
    /// Root-mean-square translational error (m).
    pub rmse: f64,
    pub stats: Stats,
    /// Transform applied to the estimate; `None` when alignment is disabled.
    pub alignment: Option<RigidTransform>,
}

pub fn compute_ate(est: &[Pose], gt: &[Pose], align: bool) -> Result<AteResult> {
    let pairs = associate(est, gt, ASSOCIATION_TOLERANCE);
    if pairs.is_empty() {
        return Err(Error::InsufficientOverlap("no temporally associated poses".into()));
    }
    let alignment = if align { Some(align_pairs(&pairs)?) } else { None };
    let tf = alignment.unwrap_or_else(RigidTransform::identity);
    let errors: Vec<f64> = pairs
        .iter()
        .map(|(e, g)| (tf.transform_point(&e.position) - g.position).norm())
        .collect();
    let stats = Stats::from_samples(&errors);
    Ok(AteResult {
        rmse: stats.rmse,
        stats,
        alignment,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpeResult {
    /// Ground-truth path length per window (m).
    pub window: f64,
    pub translation: Stats,
    pub rotation_deg: Stats,
}

fn relative(a: &Pose, b: &Pose) -> (Vec3, UnitQuaternion) {
    (
        a.attitude.inverse_rotate(&(b.position - a.position)),
        a.attitude.inverse() * b.attitude,
    )
}

/// Relative pose error between pose pairs separated by `window` metres of
/// ground-truth travel, starting from every associated pose. Relative motion
/// is invariant to a common rigid transform, so no alignment is applied.
pub fn compute_rpe(est: &[Pose], gt: &[Pose], window: f64) -> Result<RpeResult> {
    if !(window > 0.0) {
        return Err(Error::Config(format!("RPE window must be positive, got {window}")));
    }
    let pairs = associate(est, gt, ASSOCIATION_TOLERANCE);
    let mut path = Vec::with_capacity(pairs.len());
    let mut s = 0.0;
    for (k, (_, g)) in pairs.iter().enumerate() {
        if k > 0 {
            s += (g.position - pairs[k - 1].1.position).norm();
        }
        path.push(s);
    }
    let mut trans = Vec::new();
    let mut rot = Vec::new();
    let mut j = 0;
    for i in 0..pairs.len() {
        j = j.max(i + 1);
        while j < pairs.len() && path[j] - path[i] < window {
            j += 1;
        }
        if j >= pairs.len() {
            break;
        }
        let (te, re) = relative(&pairs[i].0, &pairs[j].0);
        let (tg, rg) = relative(&pairs[i].1, &pairs[j].1);
        trans.push((te - tg).norm());
        rot.push(re.angle_to(&rg).to_degrees());
    }
    if trans.is_empty() {
        return Err(Error::InsufficientOverlap(format!(
            "ground-truth path of {s:.3} m is shorter than the {window} m window"
        )));
    }
    Ok(RpeResult {
        window,
        translation: Stats::from_samples(&trans),
        rotation_deg: Stats::from_samples(&rot),
    })
}

/// One row of the summary table: ATE, RPE (m, deg) and estimate rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `"se3"` or `"none"`.
    pub alignment: String,
    pub ate: AteResult,
    pub rpe: RpeResult,
    /// Mean estimate rate (Hz).
    pub frequency: f64,
    pub associated: usize,
}

pub fn estimate_rate(est: &[Pose]) -> f64 {
    match (est.first(), est.last()) {
        (Some(a), Some(b)) if b.t > a.t => (est.len() - 1) as f64 / (b.t - a.t),
        _ => 0.0,
    }
}

pub fn evaluate(est: &[Pose], gt: &[Pose], rpe_window: f64, align: bool) -> Result<EvalReport> {
    Ok(EvalReport {
        alignment: if align { "se3" } else { "none" }.to_string(),
        ate: compute_ate(est, gt, align)?,
        rpe: compute_rpe(est, gt, rpe_window)?,
        frequency: estimate_rate(est),
        associated: associate(est, gt, ASSOCIATION_TOLERANCE).len(),
    })
}

impl EvalReport {
    pub fn table(&self) -> String {
        format!(
            "{:<10} {:>10} {:>12} {:>14} {:>10}\n{:<10} {:>10.4} {:>12.4} {:>14.4} {:>10.1}\n",
            "align",
            "ATE [m]",
            format!("RPE [m]/{}m", self.rpe.window),
            format!("RPE [deg]/{}m", self.rpe.window),
            "freq [Hz]",
            self.alignment,
            self.ate.rmse,
            self.rpe.translation.rmse,
            self.rpe.rotation_deg.rmse,
            self.frequency,
        )
    }
}
