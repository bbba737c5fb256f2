//! Penalty ground contact at the heel and toe of each foot.
//!
//! Normal force `f_n = k_p d + k_d ḋ`, clamped at zero, where `d` is the
//! penetration below `z = 0`. Tangential force `f_t = -k_t v_t`, clamped to
//! the Coulomb cone `|f_t| <= μ f_n`.

use super::kinematics::Kinematics;
use super::model::{ContactParams, RobotModel, Vec2};
use super::state::{ContactPoint, PointKind, SimState};

/// Force at a single point from its penetration state. `velocity` is the
/// world velocity of the point.
pub fn point_force(params: &ContactParams, position: Vec2, velocity: Vec2) -> (f64, f64) {
    let depth = -position.y;
    if depth <= 0.0 {
        return (0.0, 0.0);
    }
    let depth_rate = -velocity.y;
    let normal = (params.stiffness * depth + params.damping * depth_rate).max(0.0);
    let limit = params.friction * normal;
    let tangential = (-params.tangential_damping * velocity.x).clamp(-limit, limit);
    (normal, tangential)
}

/// Contact forces at the current positions and velocities.
pub fn contact_forces(model: &RobotModel, state: &SimState) -> Vec<ContactPoint> {
    let kin = Kinematics::compute(model, &state.q, &state.v);
    contact_points(model, &kin)
        .into_iter()
        .map(|p| {
            let (normal, tangential) = point_force(&model.contact, p.position, p.velocity);
            ContactPoint {
                side: p.side,
                kind: p.kind,
                position: p.position,
                normal_force: normal,
                tangential_force: tangential,
                in_contact: normal > 0.0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PointSample {
    pub side: super::model::Side,
    pub kind: PointKind,
    pub link: usize,
    pub position: Vec2,
    pub velocity: Vec2,
}

pub(crate) fn contact_points(model: &RobotModel, kin: &Kinematics) -> Vec<PointSample> {
    let mut out = Vec::with_capacity(2 * model.feet.len());
    for foot in &model.feet {
        for (kind, local) in [(PointKind::Heel, foot.heel), (PointKind::Toe, foot.toe)] {
            let position = kin.point(foot.link, local);
            out.push(PointSample {
                side: foot.side,
                kind,
                link: foot.link,
                position,
                velocity: kin.point_velocity(foot.link, position),
            });
        }
    }
    out
}

/// How a penetrating point is treated by the velocity-implicit solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Mode {
    Off,
    /// Viscous friction below the Coulomb limit.
    Stick,
    /// Friction saturated at `sign · μ · f_n`.
    Slip(f64),
}

/// Linear force law `f = f0 - D u` for a point in the given mode, where
/// `u` is the end-of-step point velocity. Returns `(f0, D)` with `D`
/// row-major.
pub(crate) fn linear_law(params: &ContactParams, depth: f64, mode: Mode) -> (Vec2, [[f64; 2]; 2]) {
    let kp = params.stiffness;
    let kd = params.damping;
    match mode {
        Mode::Off => (Vec2::zeros(), [[0.0; 2]; 2]),
        Mode::Stick => (Vec2::new(0.0, kp * depth), [[params.tangential_damping, 0.0], [0.0, kd]]),
        Mode::Slip(sign) => {
            let mu = params.friction;
            (Vec2::new(sign * mu * kp * depth, kp * depth), [[0.0, sign * mu * kd], [0.0, kd]])
        }
    }
}

pub(crate) fn apply_law(f0: Vec2, d: &[[f64; 2]; 2], u: Vec2) -> Vec2 {
    Vec2::new(f0.x - d[0][0] * u.x - d[0][1] * u.y, f0.y - d[1][0] * u.x - d[1][1] * u.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ContactParams {
        ContactParams::default()
    }

    #[test]
    fn no_force_above_ground() {
        let f = point_force(&params(), Vec2::new(0.0, 0.01), Vec2::new(1.0, -1.0));
        assert_eq!(f, (0.0, 0.0));
        let f = point_force(&params(), Vec2::new(0.0, 0.0), Vec2::new(1.0, -1.0));
        assert_eq!(f, (0.0, 0.0));
    }

    #[test]
    fn static_penetration() {
        let (n, t) = point_force(&params(), Vec2::new(0.3, -0.001), Vec2::zeros());
        assert!((n - 200.0).abs() < 1e-9);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn sliding_saturates_at_coulomb_limit() {
        let p = params();
        let (n, t) = point_force(&p, Vec2::new(0.0, -0.002), Vec2::new(5.0, 0.0));
        assert_eq!(t, -p.friction * n);
        let (n, t) = point_force(&p, Vec2::new(0.0, -0.002), Vec2::new(-5.0, 0.0));
        assert_eq!(t, p.friction * n);
    }

    #[test]
    fn separating_point_has_no_adhesion() {
        let (n, t) = point_force(&params(), Vec2::new(0.0, -0.0001), Vec2::new(0.3, 2.0));
        assert_eq!((n, t), (0.0, 0.0));
    }

    #[test]
    fn slip_law_keeps_ratio() {
        let p = params();
        let (f0, d) = linear_law(&p, 0.002, Mode::Slip(-1.0));
        let f = apply_law(f0, &d, Vec2::new(0.7, -0.05));
        assert!((f.x + p.friction * f.y).abs() < 1e-9);
    }
}
