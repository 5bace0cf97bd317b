//! Floating-base rigid-body terms `M(x) xdd + h(x, xd) = tau + J^T F`.
//!
//! Generalized velocity layout (18): base linear velocity (navigation frame),
//! base angular velocity (navigation frame), then the 12 joint rates. The base
//! attitude is carried as a quaternion in [`GeneralizedState`] rather than as
//! three coordinates; the velocity layout above is what `M` and `h` refer to.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::kinematics::link_points;
use super::{leg_slice, Leg, RobotModel, NUM_JOINTS};
use crate::so3::{skew, Mat3, UnitQuaternion, Vec3};

pub type Mat18 = SMatrix<f64, 18, 18>;
pub type Vec18 = SVector<f64, 18>;
type Jac = SMatrix<f64, 3, 18>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsFidelity {
    /// Composite rigid-body inertia and full bias forces.
    Full,
    /// `M xdd` dropped, `h` reduced to gravity loading.
    #[default]
    QuasiStatic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedState {
    pub position: Vec3,
    pub attitude: UnitQuaternion,
    pub q: [f64; NUM_JOINTS],
    pub velocity: Vec18,
    pub acceleration: Vec18,
}

impl GeneralizedState {
    pub fn at_rest(attitude: UnitQuaternion, q: [f64; NUM_JOINTS]) -> Self {
        Self {
            position: Vec3::zeros(),
            attitude,
            q,
            velocity: Vec18::zeros(),
            acceleration: Vec18::zeros(),
        }
    }
}

struct Body {
    mass: f64,
    /// Navigation-frame inertia about the CoM.
    inertia: Mat3,
    lin: Jac,
    ang: Jac,
}

fn bodies(model: &RobotModel, attitude: &UnitQuaternion, q: &[f64; NUM_JOINTS]) -> Vec<Body> {
    let r = attitude.matrix();
    let mut out = Vec::with_capacity(13);

    let mut lin = Jac::zeros();
    lin.fixed_view_mut::<3, 3>(0, 0).copy_from(&Mat3::identity());
    let mut ang = Jac::zeros();
    ang.fixed_view_mut::<3, 3>(0, 3).copy_from(&Mat3::identity());
    out.push(Body {
        mass: model.base_mass,
        inertia: r * Mat3::from_diagonal(&model.base_inertia) * r.transpose(),
        lin,
        ang,
    });

    for leg in Leg::ALL {
        let ql = leg_slice(q, leg);
        let links = link_points(model, leg, &ql);
        let params = [model.hip_link, model.thigh_link, model.shank_link];
        for (link, p) in links.iter().zip(params) {
            let arm = r * link.com;
            let mut lin = Jac::zeros();
            lin.fixed_view_mut::<3, 3>(0, 0).copy_from(&Mat3::identity());
            lin.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(&arm)));
            lin.fixed_view_mut::<3, 3>(0, 6 + 3 * leg.index()).copy_from(&(r * link.jacobian));
            let mut ang = Jac::zeros();
            ang.fixed_view_mut::<3, 3>(0, 3).copy_from(&Mat3::identity());
            ang.fixed_view_mut::<3, 3>(0, 6 + 3 * leg.index())
                .copy_from(&(r * link.angular_jacobian));
            let rl = r * link.rotation;
            out.push(Body {
                mass: p.mass,
                inertia: rl * Mat3::from_diagonal(&p.inertia) * rl.transpose(),
                lin,
                ang,
            });
        }
    }
    out
}

// Configuration advanced by `eps` along the generalized velocity.
fn advance(state: &GeneralizedState, eps: f64) -> (Vec3, UnitQuaternion, [f64; NUM_JOINTS]) {
    let v = state.velocity.fixed_rows::<3>(0).into_owned();
    let w = state.velocity.fixed_rows::<3>(3).into_owned();
    let position = state.position + v * eps;
    let attitude = UnitQuaternion::exp(&(w * eps)) * state.attitude;
    let mut q = state.q;
    for (i, qi) in q.iter_mut().enumerate() {
        *qi += eps * state.velocity[6 + i];
    }
    (position, attitude, q)
}

/// Joint-space inertia `M` and bias forces `h` at `fidelity`.
///
/// With [`DynamicsFidelity::QuasiStatic`] the returned `M` is zero and `h`
/// only holds gravity loading. With [`DynamicsFidelity::Full`], the velocity
/// product terms of `h` come from the exact body accelerations at zero
/// generalized acceleration, obtained by a central difference of the body
/// velocities along the motion.
pub fn dynamics_terms(
    model: &RobotModel,
    state: &GeneralizedState,
    fidelity: DynamicsFidelity,
) -> (Mat18, Vec18) {
    let g = Vec3::new(0.0, 0.0, model.gravity);
    let bodies_now = bodies(model, &state.attitude, &state.q);

    let mut h = Vec18::zeros();
    for b in &bodies_now {
        h += b.lin.transpose() * (g * b.mass);
    }
    if fidelity == DynamicsFidelity::QuasiStatic {
        return (Mat18::zeros(), h);
    }

    let mut m = Mat18::zeros();
    for b in &bodies_now {
        m += b.lin.transpose() * b.lin * b.mass + b.ang.transpose() * b.inertia * b.ang;
    }

    let xd = &state.velocity;
    if xd.norm() > 0.0 {
        let eps = 1e-6;
        let (_, ap, qp) = advance(state, eps);
        let (_, an, qn) = advance(state, -eps);
        let plus = bodies(model, &ap, &qp);
        let minus = bodies(model, &an, &qn);
        for ((b, bp), bn) in bodies_now.iter().zip(&plus).zip(&minus) {
            let acc = (bp.lin * xd - bn.lin * xd) / (2.0 * eps);
            let alpha = (bp.ang * xd - bn.ang * xd) / (2.0 * eps);
            let omega = b.ang * xd;
            let moment = b.inertia * alpha + omega.cross(&(b.inertia * omega));
            h += b.lin.transpose() * (acc * b.mass) + b.ang.transpose() * moment;
        }
    }
    (m, h)
}

/// Gravity torques on the three joints of `leg` (the leg rows of the
/// quasi-static `h`), cheap enough to evaluate every tick.
pub fn leg_gravity_torques(model: &RobotModel, attitude: &UnitQuaternion, leg: Leg, ql: &Vec3) -> Vec3 {
    let g_body = attitude.inverse_rotate(&Vec3::new(0.0, 0.0, model.gravity));
    let params = [model.hip_link, model.thigh_link, model.shank_link];
    link_points(model, leg, ql)
        .iter()
        .zip(params)
        .map(|(link, p)| link.jacobian.transpose() * (g_body * p.mass))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::set_leg_slice;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_state(rng: &mut ChaCha8Rng, moving: bool) -> GeneralizedState {
        let mut q = [0.0; NUM_JOINTS];
        for leg in Leg::ALL {
            let ql = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.5), rng.random_range(-2.4..-0.3));
            set_leg_slice(&mut q, leg, &ql);
        }
        let attitude = UnitQuaternion::from_euler(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-3.0..3.0),
        );
        let mut s = GeneralizedState::at_rest(attitude, q);
        s.position = Vec3::new(rng.random_range(-1.0..1.0), 0.3, 0.4);
        if moving {
            for i in 0..18 {
                s.velocity[i] = rng.random_range(-1.0..1.0);
            }
        }
        s
    }

    #[test]
    fn full_mass_matrix_is_symmetric_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in [RobotModel::aliengo(), RobotModel::anymal()] {
            for _ in 0..100 {
                let s = random_state(&mut rng, false);
                let (m, _) = dynamics_terms(&model, &s, DynamicsFidelity::Full);
                assert!((m - m.transpose()).norm() < 1e-9);
                let ev = m.symmetric_eigenvalues();
                assert!(ev.min() > 0.0, "min eigenvalue {}", ev.min());
            }
        }
    }

    #[test]
    fn zero_gravity_at_rest_has_no_bias() {
        let mut model = RobotModel::aliengo();
        model.gravity = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_state(&mut rng, false);
        for fidelity in [DynamicsFidelity::Full, DynamicsFidelity::QuasiStatic] {
            let (_, h) = dynamics_terms(&model, &s, fidelity);
            assert!(h.norm() < 1e-12);
        }
    }

    #[test]
    fn base_rows_carry_total_weight() {
        let model = RobotModel::anymal();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_state(&mut rng, false);
        let (_, h) = dynamics_terms(&model, &s, DynamicsFidelity::QuasiStatic);
        assert!((h[2] - model.total_mass() * model.gravity).abs() < 1e-9);
        assert!(h[0].abs() < 1e-12 && h[1].abs() < 1e-12);
    }

    #[test]
    fn knee_gravity_torque_single_link_statics() {
        let model = RobotModel::aliengo();
        let level = UnitQuaternion::identity();
        // Leg hanging straight down: no horizontal lever on any joint.
        let tau = leg_gravity_torques(&model, &level, Leg::LF, &Vec3::zeros());
        assert!(tau[2].abs() < 1e-12);
        // Vertical thigh, horizontal shank: lever is the shank CoM distance.
        let tau = leg_gravity_torques(&model, &level, Leg::LF, &Vec3::new(0.0, 0.0, -FRAC_PI_2));
        let expected = model.shank_link.mass * model.gravity * model.shank_link.com;
        assert!((tau[2].abs() - expected).abs() < 1e-12);
        // Restoring torque: gravity pulls the shank back down (towards positive q3).
        assert!(tau[2] < 0.0);
    }

    #[test]
    fn leg_rows_agree_between_fidelities_at_rest() {
        let model = RobotModel::aliengo();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_state(&mut rng, false);
        let (_, full) = dynamics_terms(&model, &s, DynamicsFidelity::Full);
        let (_, qs) = dynamics_terms(&model, &s, DynamicsFidelity::QuasiStatic);
        assert!((full - qs).norm() < 1e-12);
        for leg in Leg::ALL {
            let fast = leg_gravity_torques(&model, &s.attitude, leg, &leg_slice(&s.q, leg));
            let rows = qs.fixed_rows::<3>(6 + 3 * leg.index());
            assert!((fast - rows).norm() < 1e-10);
        }
    }

    // Kinetic energy is conserved in free, gravity-free motion, which pins the
    // velocity-product terms: xd^T h = 1/2 xd^T Mdot xd.
    #[test]
    fn bias_forces_conserve_kinetic_energy() {
        let mut model = RobotModel::anymal();
        model.gravity = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s = random_state(&mut rng, true);
            let (m, h) = dynamics_terms(&model, &s, DynamicsFidelity::Full);
            let eps = 1e-6;
            let mut sp = s.clone();
            let mut sn = s.clone();
            let (p, a, q) = advance(&s, eps);
            sp.position = p;
            sp.attitude = a;
            sp.q = q;
            let (p, a, q) = advance(&s, -eps);
            sn.position = p;
            sn.attitude = a;
            sn.q = q;
            let mdot = (dynamics_terms(&model, &sp, DynamicsFidelity::Full).0
                - dynamics_terms(&model, &sn, DynamicsFidelity::Full).0)
                / (2.0 * eps);
            let xd = &s.velocity;
            let lhs = xd.dot(&h);
            let rhs = 0.5 * xd.dot(&(mdot * xd));
            assert!((lhs - rhs).abs() < 1e-6 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
            assert!((m - m.transpose()).norm() < 1e-9);
        }
    }
}
