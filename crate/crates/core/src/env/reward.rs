//! Weighted sum of kernelized and Boolean reward terms.
//!
//! Terms that come in left/right pairs are evaluated per foot, and the row
//! weight applies to each foot. A transition is in double support when both
//! feet touch the ground; everything else (single support and flight) uses
//! the single-support mask.

use crate::config::{ConfigError, KvConfig, KvWriter};
use crate::dynamics::centroidal::{centroidal_from, support_geometry, CentroidalQuantities, SupportGeometry};
use crate::dynamics::kinematics::Kinematics;
use crate::dynamics::model::{RobotModel, Side};
use crate::dynamics::non_foot_contact;
use crate::dynamics::state::SimState;

use super::kernel::{rbf_kernel, rbf_scalar, DEFAULT_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermSpec {
    pub weight: f64,
    /// Kernel cutoff; ignored by Boolean terms.
    pub cutoff: f64,
    pub single_support: bool,
    pub double_support: bool,
}

const fn term(weight: f64, cutoff: f64, single_support: bool, double_support: bool) -> TermSpec {
    TermSpec {
        weight,
        cutoff,
        single_support,
        double_support,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSpec {
    pub epsilon: f64,
    /// Shrink applied to each end of the support interval for the CoM
    /// projection term, m.
    pub com_margin: f64,
    /// Mean joint torque over the control period, Nm.
    pub torques: TermSpec,
    /// Latest joint velocity command, rad/s.
    pub joint_velocities: TermSpec,
    /// Joint angles against the home posture, rad.
    pub postural: TermSpec,
    pub com_velocity_z: TermSpec,
    /// Horizontal CoM velocity against `ω₀ (x_hull - x_com)`, m/s.
    pub com_velocity_x: TermSpec,
    /// Per-foot vertical force against half the weight. The cutoff is a
    /// fraction of the robot weight.
    pub foot_force: TermSpec,
    /// `‖h_l‖² + h_ω²` of the centroidal momentum.
    pub momentum: TermSpec,
    /// Per-foot CoP against the sole center, m.
    pub foot_cop: TermSpec,
    /// Per-foot `cos` of the sole inclination against 1.
    pub foot_orientation: TermSpec,
    pub com_projection: TermSpec,
    pub feet_in_contact: TermSpec,
    pub links_in_contact: TermSpec,
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec {
            epsilon: DEFAULT_EPSILON,
            com_margin: 0.025,
            torques: term(5.0, 10.0, true, true),
            joint_velocities: term(2.0, 1.0, true, true),
            postural: term(10.0, 7.5f64.to_radians(), false, true),
            com_velocity_z: term(2.0, 1.0, true, true),
            com_velocity_x: term(2.0, 0.5, false, true),
            foot_force: term(4.0, 0.5, true, true),
            momentum: term(1.0, 50.0, true, true),
            foot_cop: term(20.0, 0.3, true, true),
            foot_orientation: term(3.0, 0.01, true, true),
            com_projection: term(10.0, 0.0, false, true),
            feet_in_contact: term(2.0, 0.0, true, true),
            links_in_contact: term(-10.0, 0.0, true, true),
        }
    }
}

const ROWS: [&str; 12] = [
    "torques",
    "joint_velocities",
    "postural",
    "com_velocity_z",
    "com_velocity_x",
    "foot_force",
    "momentum",
    "foot_cop",
    "foot_orientation",
    "com_projection",
    "feet_in_contact",
    "links_in_contact",
];

const PER_FOOT: [&str; 3] = ["foot_force", "foot_cop", "foot_orientation"];
const BOOLEAN: [&str; 3] = ["com_projection", "feet_in_contact", "links_in_contact"];

impl RewardSpec {
    fn row(&self, name: &str) -> &TermSpec {
        match name {
            "torques" => &self.torques,
            "joint_velocities" => &self.joint_velocities,
            "postural" => &self.postural,
            "com_velocity_z" => &self.com_velocity_z,
            "com_velocity_x" => &self.com_velocity_x,
            "foot_force" => &self.foot_force,
            "momentum" => &self.momentum,
            "foot_cop" => &self.foot_cop,
            "foot_orientation" => &self.foot_orientation,
            "com_projection" => &self.com_projection,
            "feet_in_contact" => &self.feet_in_contact,
            _ => &self.links_in_contact,
        }
    }

    fn row_mut(&mut self, name: &str) -> &mut TermSpec {
        match name {
            "torques" => &mut self.torques,
            "joint_velocities" => &mut self.joint_velocities,
            "postural" => &mut self.postural,
            "com_velocity_z" => &mut self.com_velocity_z,
            "com_velocity_x" => &mut self.com_velocity_x,
            "foot_force" => &mut self.foot_force,
            "momentum" => &mut self.momentum,
            "foot_cop" => &mut self.foot_cop,
            "foot_orientation" => &mut self.foot_orientation,
            "com_projection" => &mut self.com_projection,
            "feet_in_contact" => &mut self.feet_in_contact,
            _ => &mut self.links_in_contact,
        }
    }

    /// Largest reward a single transition can earn.
    pub fn max_reward(&self) -> f64 {
        ROWS.iter()
            .map(|&name| {
                let w = self.row(name).weight.max(0.0);
                if PER_FOOT.contains(&name) {
                    2.0 * w
                } else {
                    w
                }
            })
            .sum()
    }

    /// Smallest reward a single transition can earn.
    pub fn min_reward(&self) -> f64 {
        ROWS.iter()
            .map(|&name| {
                let w = self.row(name).weight.min(0.0);
                if PER_FOOT.contains(&name) {
                    2.0 * w
                } else {
                    w
                }
            })
            .sum()
    }

    pub fn read_kv(kv: &KvConfig, prefix: &str) -> Result<Self, ConfigError> {
        let mut s = RewardSpec::default();
        s.epsilon = kv.f64_or(&format!("{prefix}epsilon"), s.epsilon)?;
        s.com_margin = kv.f64_or(&format!("{prefix}com_margin"), s.com_margin)?;
        for name in ROWS {
            let mut t = *s.row(name);
            t.weight = kv.f64_or(&format!("{prefix}{name}.weight"), t.weight)?;
            if !BOOLEAN.contains(&name) {
                t.cutoff = kv.f64_or(&format!("{prefix}{name}.cutoff"), t.cutoff)?;
            }
            t.single_support = kv.bool_or(&format!("{prefix}{name}.single_support"), t.single_support)?;
            t.double_support = kv.bool_or(&format!("{prefix}{name}.double_support"), t.double_support)?;
            *s.row_mut(name) = t;
        }
        s.validate(prefix)?;
        Ok(s)
    }

    pub fn write_kv(&self, w: &mut KvWriter, prefix: &str) {
        w.f64(&format!("{prefix}epsilon"), self.epsilon)
            .f64(&format!("{prefix}com_margin"), self.com_margin);
        for name in ROWS {
            let t = self.row(name);
            w.f64(&format!("{prefix}{name}.weight"), t.weight);
            if !BOOLEAN.contains(&name) {
                w.f64(&format!("{prefix}{name}.cutoff"), t.cutoff);
            }
            w.bool(&format!("{prefix}{name}.single_support"), t.single_support)
                .bool(&format!("{prefix}{name}.double_support"), t.double_support);
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<(), ConfigError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ConfigError::invalid(format!("{prefix}epsilon"), "must lie in (0, 1)"));
        }
        if !(self.com_margin >= 0.0) {
            return Err(ConfigError::invalid(format!("{prefix}com_margin"), "must be >= 0"));
        }
        for name in ROWS {
            let t = self.row(name);
            if !t.weight.is_finite() {
                return Err(ConfigError::invalid(format!("{prefix}{name}.weight"), "must be finite"));
            }
            if !BOOLEAN.contains(&name) && !(t.cutoff > 0.0) {
                return Err(ConfigError::invalid(format!("{prefix}{name}.cutoff"), "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermValue {
    pub name: &'static str,
    /// Scalar summary of the measured quantity (distance to target for
    /// vector terms).
    pub raw: f64,
    /// Kernel output in `[0, 1]`, or 0/1 for Boolean terms.
    pub kernel: f64,
    pub contribution: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown {
    pub terms: Vec<TermValue>,
    pub total: f64,
    pub double_support: bool,
    /// A non-foot link touched the ground.
    pub terminal: bool,
}

impl RewardBreakdown {
    pub fn get(&self, name: &str) -> Option<&TermValue> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Names of the breakdown entries, in order.
pub const TERM_NAMES: [&str; 15] = [
    "torques",
    "joint_velocities",
    "postural",
    "com_velocity_z",
    "com_velocity_x",
    "foot_force_left",
    "foot_force_right",
    "momentum",
    "foot_cop_left",
    "foot_cop_right",
    "foot_orientation_left",
    "foot_orientation_right",
    "com_projection",
    "feet_in_contact",
    "links_in_contact",
];

/// Everything the reward reads from a transition.
#[derive(Debug, Clone)]
pub struct RewardInputs {
    pub joints: Vec<f64>,
    pub home: Vec<f64>,
    /// Latest joint velocity command, rad/s.
    pub action: Vec<f64>,
    /// Mean of all per-substep joint torques of the control period.
    pub mean_torque: f64,
    pub centroidal: CentroidalQuantities,
    pub support: SupportGeometry,
    /// Absolute sole inclination, left then right, rad.
    pub foot_angles: [f64; 2],
    pub weight: f64,
    pub gravity: f64,
    pub non_foot_contact: bool,
}

impl RewardInputs {
    /// Gathers the inputs from the state at the end of a control period.
    pub fn from_state(model: &RobotModel, state: &SimState, action: &[f64], substep_torques: &[f64]) -> Self {
        let kin = Kinematics::compute(model, &state.q, &state.v);
        let angle = |side| model.foot(side).map(|f| kin.frames[f.link].angle).unwrap_or(0.0);
        let mean_torque = if substep_torques.is_empty() {
            0.0
        } else {
            substep_torques.iter().sum::<f64>() / substep_torques.len() as f64
        };
        RewardInputs {
            joints: state.joints().to_vec(),
            home: model.home.clone(),
            action: action.to_vec(),
            mean_torque,
            centroidal: centroidal_from(model, &kin),
            support: support_geometry(state),
            foot_angles: [angle(Side::Left), angle(Side::Right)],
            weight: model.weight(),
            gravity: model.gravity,
            non_foot_contact: non_foot_contact(model, &kin),
        }
    }
}

pub fn compute_reward(model: &RobotModel, state: &SimState, action: &[f64], substep_torques: &[f64], spec: &RewardSpec) -> RewardBreakdown {
    evaluate(&RewardInputs::from_state(model, state, action, substep_torques), spec)
}

pub fn evaluate(inp: &RewardInputs, spec: &RewardSpec) -> RewardBreakdown {
    let eps = spec.epsilon;
    let ds = inp.support.double_support();
    let mut terms = Vec::with_capacity(TERM_NAMES.len());
    let mut push = |name: &'static str, t: &TermSpec, raw: f64, kernel: f64| {
        let active = if ds { t.double_support } else { t.single_support };
        let contribution = if active { t.weight * kernel } else { 0.0 };
        terms.push(TermValue {
            name,
            raw,
            kernel,
            contribution,
            active,
        });
    };

    push(
        "torques",
        &spec.torques,
        inp.mean_torque,
        rbf_scalar(inp.mean_torque, 0.0, spec.torques.cutoff, eps),
    );
    let zeros = vec![0.0; inp.action.len()];
    push(
        "joint_velocities",
        &spec.joint_velocities,
        norm(&inp.action),
        rbf_kernel(&inp.action, &zeros, spec.joint_velocities.cutoff, eps),
    );
    push(
        "postural",
        &spec.postural,
        distance(&inp.joints, &inp.home),
        rbf_kernel(&inp.joints, &inp.home, spec.postural.cutoff, eps),
    );
    let vel = inp.centroidal.com_velocity;
    push(
        "com_velocity_z",
        &spec.com_velocity_z,
        vel.y,
        rbf_scalar(vel.y, 0.0, spec.com_velocity_z.cutoff, eps),
    );
    let (vx_raw, vx_kernel) = match inp.support.hull_center() {
        Some(center) if inp.centroidal.com.y > 0.0 => {
            let omega0 = (inp.gravity / inp.centroidal.com.y).sqrt();
            let target = omega0 * (center - inp.centroidal.com.x);
            (vel.x - target, rbf_scalar(vel.x, target, spec.com_velocity_x.cutoff, eps))
        }
        _ => (0.0, 0.0),
    };
    push("com_velocity_x", &spec.com_velocity_x, vx_raw, vx_kernel);

    let half_weight = 0.5 * inp.weight;
    let force_cutoff = spec.foot_force.cutoff * inp.weight;
    for (name, side) in [("foot_force_left", Side::Left), ("foot_force_right", Side::Right)] {
        let f = inp.support.foot(side).vertical_force;
        push(name, &spec.foot_force, f, rbf_scalar(f, half_weight, force_cutoff, eps));
    }

    let h = inp.centroidal.linear.norm_squared() + inp.centroidal.angular * inp.centroidal.angular;
    push("momentum", &spec.momentum, h, rbf_scalar(h, 0.0, spec.momentum.cutoff, eps));

    for (name, side) in [("foot_cop_left", Side::Left), ("foot_cop_right", Side::Right)] {
        let foot = inp.support.foot(side);
        let (raw, kernel) = match foot.cop {
            Some(cop) => (cop - foot.sole_center, rbf_scalar(cop, foot.sole_center, spec.foot_cop.cutoff, eps)),
            None => (0.0, 0.0),
        };
        push(name, &spec.foot_cop, raw, kernel);
    }

    for (name, angle) in [("foot_orientation_left", inp.foot_angles[0]), ("foot_orientation_right", inp.foot_angles[1])] {
        let c = angle.cos();
        push(name, &spec.foot_orientation, c, rbf_scalar(c, 1.0, spec.foot_orientation.cutoff, eps));
    }

    let inside = match inp.support.interval {
        Some((lo, hi)) => {
            let x = inp.centroidal.com.x;
            x >= lo + spec.com_margin && x <= hi - spec.com_margin
        }
        None => false,
    };
    push("com_projection", &spec.com_projection, inp.centroidal.com.x, bool_value(inside));
    let any_foot = inp.support.feet_in_contact() > 0;
    push("feet_in_contact", &spec.feet_in_contact, bool_value(any_foot), bool_value(any_foot));
    let links = inp.non_foot_contact;
    push("links_in_contact", &spec.links_in_contact, bool_value(links), bool_value(links));

    let total = terms.iter().map(|t| t.contribution).sum();
    RewardBreakdown {
        terms,
        total,
        double_support: ds,
        terminal: links,
    }
}

fn bool_value(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::centroidal::FootSupport;
    use crate::dynamics::model::Vec2;

    fn foot(side: Side, force: f64, center: f64) -> FootSupport {
        FootSupport {
            side,
            in_contact: force > 0.0,
            vertical_force: force,
            cop: (force > 0.0).then_some(center),
            sole_center: center,
        }
    }

    pub(crate) fn at_target() -> RewardInputs {
        let weight = 33.0 * 9.81;
        RewardInputs {
            joints: vec![0.1; 8],
            home: vec![0.1; 8],
            action: vec![0.0; 8],
            mean_torque: 0.0,
            centroidal: CentroidalQuantities {
                com: Vec2::new(0.02, 0.6),
                com_velocity: Vec2::zeros(),
                linear: Vec2::zeros(),
                angular: 0.0,
            },
            support: SupportGeometry {
                left: foot(Side::Left, weight / 2.0, 0.02),
                right: foot(Side::Right, weight / 2.0, 0.02),
                interval: Some((-0.08, 0.12)),
            },
            foot_angles: [0.0, 0.0],
            weight,
            gravity: 9.81,
            non_foot_contact: false,
        }
    }

    #[test]
    fn all_terms_at_target_in_double_support() {
        let mut inp = at_target();
        // CoM at the hull center gives a zero horizontal velocity target.
        inp.centroidal.com.x = 0.02;
        let r = evaluate(&inp, &RewardSpec::default());
        assert_eq!(r.total, 88.0);
        assert_eq!(RewardSpec::default().max_reward(), 88.0);
        assert!(r.double_support);
    }

    #[test]
    fn single_support_masks_steady_state_terms() {
        let mut inp = at_target();
        inp.support.right = foot(Side::Right, 0.0, 0.02);
        let r = evaluate(&inp, &RewardSpec::default());
        for name in ["postural", "com_velocity_x", "com_projection"] {
            assert_eq!(r.get(name).unwrap().contribution, 0.0, "{name}");
        }
        assert!(r.get("torques").unwrap().contribution > 0.0);
    }

    #[test]
    fn link_contact_is_terminal_penalty() {
        let mut inp = at_target();
        inp.non_foot_contact = true;
        let r = evaluate(&inp, &RewardSpec::default());
        assert_eq!(r.get("links_in_contact").unwrap().contribution, -10.0);
        assert!(r.terminal);
    }

    #[test]
    fn horizontal_velocity_target_points_to_hull_center() {
        let mut inp = at_target();
        inp.centroidal.com.x = -0.03;
        let omega0 = (9.81f64 / 0.6).sqrt();
        inp.centroidal.com_velocity.x = omega0 * 0.05;
        let r = evaluate(&inp, &RewardSpec::default());
        assert!((r.get("com_velocity_x").unwrap().kernel - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_round_trip() {
        let mut s = RewardSpec::default();
        s.postural.weight = 3.5;
        s.foot_cop.cutoff = 0.2;
        s.com_projection.double_support = false;
        let mut w = KvWriter::new();
        s.write_kv(&mut w, "reward.");
        let kv = KvConfig::parse(&w.finish()).unwrap();
        assert_eq!(RewardSpec::read_kv(&kv, "reward.").unwrap(), s);
        kv.finish().unwrap();
    }
}
