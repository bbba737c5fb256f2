//! Whole-body quantities: centroidal momentum and support geometry.

use super::kinematics::Kinematics;
use super::model::{RobotModel, Side, Vec2};
use super::state::SimState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidalQuantities {
    pub com: Vec2,
    pub com_velocity: Vec2,
    /// Linear momentum, kg·m/s.
    pub linear: Vec2,
    /// Angular momentum about the CoM, kg·m²/s.
    pub angular: f64,
}

pub fn centroidal(model: &RobotModel, q: &[f64], v: &[f64]) -> CentroidalQuantities {
    centroidal_from(model, &Kinematics::compute(model, q, v))
}

pub fn centroidal_from(model: &RobotModel, kin: &Kinematics) -> CentroidalQuantities {
    let mut weighted = Vec2::zeros();
    let mut linear = Vec2::zeros();
    for (l, f) in model.links.iter().zip(&kin.frames) {
        weighted += l.mass * f.com;
        linear += l.mass * f.com_vel;
    }
    let com = weighted / model.total_mass;
    let mut angular = 0.0;
    for (l, f) in model.links.iter().zip(&kin.frames) {
        let r = f.com - com;
        let p = l.mass * f.com_vel;
        angular += r.x * p.y - r.y * p.x + l.inertia * f.omega;
    }
    CentroidalQuantities {
        com,
        com_velocity: linear / model.total_mass,
        linear,
        angular,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootSupport {
    pub side: Side,
    pub in_contact: bool,
    /// Sum of normal forces over the foot's points, N.
    pub vertical_force: f64,
    /// Force-weighted mean contact x; `None` when the foot carries no load.
    pub cop: Option<f64>,
    /// Midpoint of the sole (heel to toe), world x.
    pub sole_center: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportGeometry {
    pub left: FootSupport,
    pub right: FootSupport,
    /// Convex hull of all in-contact points; `None` when airborne.
    pub interval: Option<(f64, f64)>,
}

impl SupportGeometry {
    pub fn foot(&self, side: Side) -> &FootSupport {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn feet_in_contact(&self) -> usize {
        self.left.in_contact as usize + self.right.in_contact as usize
    }

    pub fn double_support(&self) -> bool {
        self.left.in_contact && self.right.in_contact
    }

    /// Center of the support interval.
    pub fn hull_center(&self) -> Option<f64> {
        self.interval.map(|(lo, hi)| 0.5 * (lo + hi))
    }
}

/// Per-foot CoP, support interval and contact flags from the contact forces
/// recorded in `state`.
pub fn support_geometry(state: &SimState) -> SupportGeometry {
    let foot = |side: Side| {
        let pts: Vec<_> = state.contacts.iter().filter(|c| c.side == side).collect();
        let vertical_force: f64 = pts.iter().map(|c| c.normal_force).sum();
        let moment: f64 = pts.iter().map(|c| c.normal_force * c.position.x).sum();
        let sole_center = if pts.is_empty() {
            f64::NAN
        } else {
            pts.iter().map(|c| c.position.x).sum::<f64>() / pts.len() as f64
        };
        FootSupport {
            side,
            in_contact: pts.iter().any(|c| c.in_contact),
            vertical_force,
            cop: (vertical_force > 0.0).then(|| moment / vertical_force),
            sole_center,
        }
    };
    let interval = state.contacts.iter().filter(|c| c.in_contact).fold(None, |acc: Option<(f64, f64)>, c| {
        let x = c.position.x;
        Some(match acc {
            None => (x, x),
            Some((lo, hi)) => (lo.min(x), hi.max(x)),
        })
    });
    SupportGeometry {
        left: foot(Side::Left),
        right: foot(Side::Right),
        interval,
    }
}
