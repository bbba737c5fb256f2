//! Planar articulated robot description.
//!
//! Coordinates live in the sagittal plane: `x` points forward, `z` up.
//! Angles are measured counter-clockwise from `+x` towards `+z`, so a
//! positive hip angle swings a hanging leg forward and a positive knee angle
//! hyper-extends it.
//!
//! Links form a tree rooted at the floating base (link 0). Every other link
//! `k` is attached to its parent through revolute joint `k - 1`.

use nalgebra::Vector2;

use crate::config::{ConfigError, KvConfig, KvWriter};

pub type Vec2 = Vector2<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub parent: Option<usize>,
    /// Joint location expressed in the parent link frame.
    pub joint_offset: Vec2,
    /// Center of mass in the link frame.
    pub com: Vec2,
    pub mass: f64,
    /// Rotational inertia about the center of mass.
    pub inertia: f64,
    pub length: f64,
    /// Points that end the episode when they touch the ground.
    pub probes: Vec<Vec2>,
    pub is_foot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    /// Child link driven by this joint.
    pub link: usize,
    pub lower: f64,
    pub upper: f64,
    pub velocity_limit: f64,
    pub gains: PidGains,
}

impl Joint {
    pub fn clamp(&self, angle: f64) -> f64 {
        angle.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Foot {
    pub side: Side,
    pub link: usize,
    /// Heel and toe contact points in the foot frame.
    pub heel: Vec2,
    pub toe: Vec2,
}

impl Foot {
    pub fn points(&self) -> [Vec2; 2] {
        [self.heel, self.toe]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams {
    /// Normal stiffness, N/m.
    pub stiffness: f64,
    /// Normal damping, N·s/m.
    pub damping: f64,
    /// Viscous tangential coefficient, N·s/m.
    pub tangential_damping: f64,
    /// Coulomb coefficient.
    pub friction: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams {
            stiffness: 2.0e5,
            damping: 2.0e3,
            tangential_damping: 1.0e3,
            friction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub feet: Vec<Foot>,
    pub gravity: f64,
    pub contact: ContactParams,
    /// Delay applied to joint references before the PIDs see them, s.
    pub actuation_delay: f64,
    pub torque_limit: Option<f64>,
    /// Locks the three base coordinates (used for fixed-base test rigs).
    pub fixed_base: bool,
    /// Reference joint posture.
    pub home: Vec<f64>,
    pub total_mass: f64,
    /// Generalized coordinates that move each link: base dofs first, then
    /// the joints on the path from the root, in increasing order.
    pub(crate) chains: Vec<Vec<usize>>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("invalid model parameter `{field}`: {reason}")]
pub struct ModelError {
    pub field: String,
    pub reason: String,
}

fn bad(field: impl Into<String>, reason: impl Into<String>) -> ModelError {
    ModelError {
        field: field.into(),
        reason: reason.into(),
    }
}

impl RobotModel {
    /// Assembles and validates a model from explicit parts.
    pub fn from_parts(links: Vec<Link>, joints: Vec<Joint>, feet: Vec<Foot>, gravity: f64, contact: ContactParams, home: Vec<f64>) -> Result<Self, ModelError> {
        if links.is_empty() {
            return Err(bad("links", "at least the base link is required"));
        }
        if links[0].parent.is_some() {
            return Err(bad("links[0].parent", "the base link has no parent"));
        }
        if joints.len() != links.len() - 1 {
            return Err(bad("joints", "one joint per non-base link is required"));
        }
        for (k, link) in links.iter().enumerate() {
            let f = |what: &str| format!("link.{}.{what}", link.name);
            if !(link.mass > 0.0 && link.mass.is_finite()) {
                return Err(bad(f("mass"), format!("must be > 0, got {}", link.mass)));
            }
            if !(link.inertia > 0.0 && link.inertia.is_finite()) {
                return Err(bad(f("inertia"), format!("must be > 0, got {}", link.inertia)));
            }
            if k > 0 {
                match link.parent {
                    Some(p) if p < k => {}
                    _ => return Err(bad(f("parent"), "parent must precede the link")),
                }
            }
        }
        for (j, joint) in joints.iter().enumerate() {
            if joint.link != j + 1 {
                return Err(bad(format!("joint.{}.link", joint.name), "joint k must drive link k + 1"));
            }
            if !(joint.lower < joint.upper) {
                return Err(bad(
                    format!("joint.{}.limits", joint.name),
                    format!("lower {} must be < upper {}", joint.lower, joint.upper),
                ));
            }
        }
        for foot in &feet {
            if foot.link >= links.len() {
                return Err(bad("foot.link", "foot refers to a missing link"));
            }
        }
        if home.len() != joints.len() {
            return Err(bad("home", "one home angle per joint is required"));
        }
        if !(contact.friction > 0.0) {
            return Err(bad("contact.friction", "Coulomb coefficient must be > 0"));
        }
        if !(contact.stiffness > 0.0) || contact.damping < 0.0 || contact.tangential_damping < 0.0 {
            return Err(bad("contact", "stiffness must be > 0 and damping coefficients >= 0"));
        }
        if !gravity.is_finite() || gravity < 0.0 {
            return Err(bad("gravity", "must be finite and >= 0"));
        }
        let total_mass = links.iter().map(|l| l.mass).sum();
        let mut model = RobotModel {
            links,
            joints,
            feet,
            gravity,
            contact,
            actuation_delay: 0.0,
            torque_limit: None,
            fixed_base: false,
            home,
            total_mass,
            chains: Vec::new(),
        };
        model.rebuild_chains();
        Ok(model)
    }

    fn rebuild_chains(&mut self) {
        let mut chains: Vec<Vec<usize>> = Vec::with_capacity(self.links.len());
        for (k, link) in self.links.iter().enumerate() {
            let chain = match link.parent {
                None => vec![0, 1, 2],
                Some(p) => {
                    let mut c = chains[p].clone();
                    c.push(3 + (k - 1));
                    c
                }
            };
            chains.push(chain);
        }
        self.chains = chains;
    }

    /// Recomputes `total_mass` after link masses were edited.
    pub fn refresh_mass(&mut self) {
        self.total_mass = self.links.iter().map(|l| l.mass).sum();
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn n_dofs(&self) -> usize {
        3 + self.joints.len()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn foot(&self, side: Side) -> Option<&Foot> {
        self.feet.iter().find(|f| f.side == side)
    }

    pub fn weight(&self) -> f64 {
        self.total_mass * self.gravity
    }
}

/// Inertial and geometric parameters of one link kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub mass: f64,
    pub inertia: f64,
    pub length: f64,
    /// Distance of the CoM from the joint along the link axis.
    pub com_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointParams {
    pub lower: f64,
    pub upper: f64,
    pub velocity_limit: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub home: f64,
}

/// Configuration of the default planar biped. Left and right legs share
/// their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub gravity: f64,
    pub contact: ContactParams,
    pub actuation_delay: f64,
    /// Symmetric joint torque clamp; `None` leaves torques unsaturated.
    pub torque_limit: Option<f64>,
    pub pelvis: LinkParams,
    pub torso: LinkParams,
    pub arm: LinkParams,
    pub thigh: LinkParams,
    pub shank: LinkParams,
    pub foot: LinkParams,
    /// Height of the torso joint above the hip joints.
    pub torso_mount: f64,
    pub heel: f64,
    pub toe: f64,
    /// Vertical distance from the ankle joint to the sole.
    pub sole_depth: f64,
    pub torso_joint: JointParams,
    pub shoulder: JointParams,
    pub hip: JointParams,
    pub knee: JointParams,
    pub ankle: JointParams,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let joint = |lower, upper, kp, kd, home| JointParams {
            lower,
            upper,
            velocity_limit: 10.0,
            kp,
            ki: 0.0,
            kd,
            home,
        };
        ModelConfig {
            gravity: 9.81,
            contact: ContactParams::default(),
            actuation_delay: 0.0,
            torque_limit: None,
            pelvis: LinkParams {
                mass: 5.0,
                inertia: 0.04,
                length: 0.08,
                com_offset: 0.03,
            },
            torso: LinkParams {
                mass: 9.0,
                inertia: 0.1,
                length: 0.35,
                com_offset: 0.15,
            },
            arm: LinkParams {
                mass: 3.0,
                inertia: 0.04,
                length: 0.4,
                com_offset: 0.18,
            },
            thigh: LinkParams {
                mass: 4.0,
                inertia: 0.025,
                length: 0.25,
                com_offset: 0.11,
            },
            shank: LinkParams {
                mass: 2.5,
                inertia: 0.015,
                length: 0.25,
                com_offset: 0.11,
            },
            foot: LinkParams {
                mass: 1.5,
                inertia: 0.006,
                length: 0.2,
                com_offset: 0.02,
            },
            torso_mount: 0.08,
            heel: -0.08,
            toe: 0.12,
            sole_depth: 0.05,
            torso_joint: joint(-0.8, 0.8, 400.0, 25.0, 0.0),
            shoulder: joint(-2.5, 2.5, 150.0, 8.0, 0.0),
            hip: joint(-1.0, 1.6, 600.0, 30.0, 0.15),
            knee: joint(-2.0, 0.0, 600.0, 30.0, -0.3),
            ankle: joint(-0.7, 0.7, 400.0, 30.0, 0.15),
        }
    }
}

const LINK_KINDS: [&str; 6] = ["pelvis", "torso", "arm", "thigh", "shank", "foot"];
const JOINT_KINDS: [&str; 5] = ["torso", "shoulder", "hip", "knee", "ankle"];

impl ModelConfig {
    fn link(&self, kind: &str) -> &LinkParams {
        match kind {
            "pelvis" => &self.pelvis,
            "torso" => &self.torso,
            "arm" => &self.arm,
            "thigh" => &self.thigh,
            "shank" => &self.shank,
            _ => &self.foot,
        }
    }

    fn link_mut(&mut self, kind: &str) -> &mut LinkParams {
        match kind {
            "pelvis" => &mut self.pelvis,
            "torso" => &mut self.torso,
            "arm" => &mut self.arm,
            "thigh" => &mut self.thigh,
            "shank" => &mut self.shank,
            _ => &mut self.foot,
        }
    }

    fn joint(&self, kind: &str) -> &JointParams {
        match kind {
            "torso" => &self.torso_joint,
            "shoulder" => &self.shoulder,
            "hip" => &self.hip,
            "knee" => &self.knee,
            _ => &self.ankle,
        }
    }

    fn joint_mut(&mut self, kind: &str) -> &mut JointParams {
        match kind {
            "torso" => &mut self.torso_joint,
            "shoulder" => &mut self.shoulder,
            "hip" => &mut self.hip,
            "knee" => &mut self.knee,
            _ => &mut self.ankle,
        }
    }

    /// Reads a model file. Missing keys keep their default values.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let mut c = ModelConfig::default();
        c.gravity = kv.f64_or("gravity", c.gravity)?;
        c.contact.stiffness = kv.f64_or("contact.stiffness", c.contact.stiffness)?;
        c.contact.damping = kv.f64_or("contact.damping", c.contact.damping)?;
        c.contact.tangential_damping = kv.f64_or("contact.tangential_damping", c.contact.tangential_damping)?;
        c.contact.friction = kv.f64_or("contact.friction", c.contact.friction)?;
        c.actuation_delay = kv.f64_or("actuation_delay", c.actuation_delay)?;
        let limit = kv.f64_or("torque_limit", c.torque_limit.unwrap_or(0.0))?;
        c.torque_limit = (limit > 0.0).then_some(limit);
        for kind in LINK_KINDS {
            let mut p = *c.link(kind);
            p.mass = kv.f64_or(&format!("link.{kind}.mass"), p.mass)?;
            p.inertia = kv.f64_or(&format!("link.{kind}.inertia"), p.inertia)?;
            p.length = kv.f64_or(&format!("link.{kind}.length"), p.length)?;
            p.com_offset = kv.f64_or(&format!("link.{kind}.com_offset"), p.com_offset)?;
            *c.link_mut(kind) = p;
        }
        c.torso_mount = kv.f64_or("torso_mount", c.torso_mount)?;
        c.heel = kv.f64_or("foot.heel", c.heel)?;
        c.toe = kv.f64_or("foot.toe", c.toe)?;
        c.sole_depth = kv.f64_or("foot.sole_depth", c.sole_depth)?;
        for kind in JOINT_KINDS {
            let mut j = *c.joint(kind);
            j.lower = kv.f64_or(&format!("joint.{kind}.lower"), j.lower)?;
            j.upper = kv.f64_or(&format!("joint.{kind}.upper"), j.upper)?;
            j.velocity_limit = kv.f64_or(&format!("joint.{kind}.velocity_limit"), j.velocity_limit)?;
            j.kp = kv.f64_or(&format!("joint.{kind}.kp"), j.kp)?;
            j.ki = kv.f64_or(&format!("joint.{kind}.ki"), j.ki)?;
            j.kd = kv.f64_or(&format!("joint.{kind}.kd"), j.kd)?;
            j.home = kv.f64_or(&format!("joint.{kind}.home"), j.home)?;
            *c.joint_mut(kind) = j;
        }
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let kv = KvConfig::parse(text)?;
        let c = Self::from_kv(&kv)?;
        kv.finish()?;
        Ok(c)
    }

    /// Canonical text form; every key is written.
    pub fn to_kv_string(&self) -> String {
        let mut w = KvWriter::new();
        w.comment("planar biped model (SI units, radians)");
        w.f64("gravity", self.gravity)
            .f64("contact.stiffness", self.contact.stiffness)
            .f64("contact.damping", self.contact.damping)
            .f64("contact.tangential_damping", self.contact.tangential_damping)
            .f64("contact.friction", self.contact.friction)
            .f64("actuation_delay", self.actuation_delay)
            .f64("torque_limit", self.torque_limit.unwrap_or(0.0));
        for kind in LINK_KINDS {
            let p = self.link(kind);
            w.f64(&format!("link.{kind}.mass"), p.mass)
                .f64(&format!("link.{kind}.inertia"), p.inertia)
                .f64(&format!("link.{kind}.length"), p.length)
                .f64(&format!("link.{kind}.com_offset"), p.com_offset);
        }
        w.f64("torso_mount", self.torso_mount)
            .f64("foot.heel", self.heel)
            .f64("foot.toe", self.toe)
            .f64("foot.sole_depth", self.sole_depth);
        for kind in JOINT_KINDS {
            let j = self.joint(kind);
            w.f64(&format!("joint.{kind}.lower"), j.lower)
                .f64(&format!("joint.{kind}.upper"), j.upper)
                .f64(&format!("joint.{kind}.velocity_limit"), j.velocity_limit)
                .f64(&format!("joint.{kind}.kp"), j.kp)
                .f64(&format!("joint.{kind}.ki"), j.ki)
                .f64(&format!("joint.{kind}.kd"), j.kd)
                .f64(&format!("joint.{kind}.home"), j.home);
        }
        w.finish()
    }
}

/// Joint order of the default biped.
pub const BIPED_JOINTS: [&str; 8] = [
    "torso_pitch",
    "shoulder_pitch",
    "hip_left",
    "knee_left",
    "ankle_left",
    "hip_right",
    "knee_right",
    "ankle_right",
];

/// Builds the eight-joint planar biped described by `cfg`.
pub fn build_model(cfg: &ModelConfig) -> Result<RobotModel, ModelError> {
    for kind in LINK_KINDS {
        let p = cfg.link(kind);
        if !(p.length > 0.0) {
            return Err(bad(format!("link.{kind}.length"), "must be > 0"));
        }
    }
    if !(cfg.heel < cfg.toe) {
        return Err(bad("foot.heel", "heel offset must be behind the toe offset"));
    }
    if !(cfg.sole_depth >= 0.0) {
        return Err(bad("foot.sole_depth", "must be >= 0"));
    }
    if !(cfg.actuation_delay >= 0.0) {
        return Err(bad("actuation_delay", "must be >= 0"));
    }
    let up = |v: f64| Vec2::new(0.0, v);
    let down = |v: f64| Vec2::new(0.0, -v);
    let link = |name: &str, parent: Option<usize>, offset: Vec2, p: &LinkParams, com: Vec2, probes: Vec<Vec2>| Link {
        name: name.to_string(),
        parent,
        joint_offset: offset,
        com,
        mass: p.mass,
        inertia: p.inertia,
        length: p.length,
        probes,
        is_foot: false,
    };
    let mut links = vec![
        link(
            "pelvis",
            None,
            Vec2::zeros(),
            &cfg.pelvis,
            up(cfg.pelvis.com_offset),
            vec![Vec2::zeros(), up(cfg.pelvis.length)],
        ),
        link(
            "torso",
            Some(0),
            up(cfg.torso_mount),
            &cfg.torso,
            up(cfg.torso.com_offset),
            vec![up(cfg.torso.length)],
        ),
        link(
            "arm",
            Some(1),
            up(cfg.torso.length),
            &cfg.arm,
            down(cfg.arm.com_offset),
            vec![down(cfg.arm.length)],
        ),
    ];
    let mut feet = Vec::new();
    for (side, suffix) in [(Side::Left, "left"), (Side::Right, "right")] {
        let thigh = links.len();
        links.push(link(
            &format!("thigh_{suffix}"),
            Some(0),
            Vec2::zeros(),
            &cfg.thigh,
            down(cfg.thigh.com_offset),
            vec![down(cfg.thigh.length)],
        ));
        links.push(link(
            &format!("shank_{suffix}"),
            Some(thigh),
            down(cfg.thigh.length),
            &cfg.shank,
            down(cfg.shank.com_offset),
            Vec::new(),
        ));
        let foot_link = links.len();
        let mut foot = link(
            &format!("foot_{suffix}"),
            Some(thigh + 1),
            down(cfg.shank.length),
            &cfg.foot,
            Vec2::new(cfg.foot.com_offset, -0.5 * cfg.sole_depth),
            Vec::new(),
        );
        foot.is_foot = true;
        links.push(foot);
        feet.push(Foot {
            side,
            link: foot_link,
            heel: Vec2::new(cfg.heel, -cfg.sole_depth),
            toe: Vec2::new(cfg.toe, -cfg.sole_depth),
        });
    }
    let jp = [cfg.torso_joint, cfg.shoulder, cfg.hip, cfg.knee, cfg.ankle, cfg.hip, cfg.knee, cfg.ankle];
    let joints: Vec<Joint> = BIPED_JOINTS
        .iter()
        .zip(jp.iter())
        .enumerate()
        .map(|(k, (name, p))| Joint {
            name: name.to_string(),
            link: k + 1,
            lower: p.lower,
            upper: p.upper,
            velocity_limit: p.velocity_limit,
            gains: PidGains { kp: p.kp, ki: p.ki, kd: p.kd },
        })
        .collect();
    for (j, p) in joints.iter().zip(jp.iter()) {
        if !(p.home >= j.lower && p.home <= j.upper) {
            return Err(bad(format!("joint.{}.home", j.name), "home angle outside limits"));
        }
    }
    let home = jp.iter().map(|p| p.home).collect();
    let mut model = RobotModel::from_parts(links, joints, feet, cfg.gravity, cfg.contact, home)?;
    model.actuation_delay = cfg.actuation_delay;
    model.torque_limit = cfg.torque_limit;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_biped_weighs_33_kg() {
        let m = build_model(&ModelConfig::default()).unwrap();
        assert!((m.total_mass - 33.0).abs() < 1e-12);
        assert_eq!(m.n_joints(), 8);
        assert_eq!(m.n_dofs(), 11);
        assert_eq!(m.feet.len(), 2);
        for f in &m.feet {
            assert!(((f.toe - f.heel).norm() - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mass_link_is_rejected() {
        let mut cfg = ModelConfig::default();
        cfg.shank.mass = 0.0;
        let err = build_model(&cfg).unwrap_err();
        assert_eq!(err.field, "link.shank_left.mass");
    }

    #[test]
    fn inverted_limits_are_rejected() {
        let mut cfg = ModelConfig::default();
        cfg.knee.lower = 0.5;
        cfg.knee.upper = 0.5;
        assert!(build_model(&cfg).unwrap_err().field.contains("knee"));
    }

    #[test]
    fn friction_override() {
        let mut cfg = ModelConfig::default();
        cfg.contact.friction = 1.0;
        assert_eq!(build_model(&cfg).unwrap().contact.friction, 1.0);
        cfg.contact.friction = 0.0;
        assert_eq!(build_model(&cfg).unwrap_err().field, "contact.friction");
    }

    #[test]
    fn chains_follow_the_tree() {
        let m = build_model(&ModelConfig::default()).unwrap();
        let foot = m.foot(Side::Right).unwrap().link;
        assert_eq!(m.chains[foot], vec![0, 1, 2, 3 + 5, 3 + 6, 3 + 7]);
        assert_eq!(m.chains[2], vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn config_text_round_trip() {
        let mut cfg = ModelConfig::default();
        cfg.contact.friction = 0.2;
        cfg.torque_limit = Some(80.0);
        let back = ModelConfig::parse(&cfg.to_kv_string()).unwrap();
        assert_eq!(back, cfg);
        assert!(ModelConfig::parse("link.arm.mas = 3").is_err());
    }
}
