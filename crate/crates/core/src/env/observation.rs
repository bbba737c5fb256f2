//! Normalized observation vector.
//!
//! Layout for `n` joints:
//!
//! | slice            | content                                          |
//! |------------------|--------------------------------------------------|
//! | `0..n`           | joint angles over the joint limits               |
//! | `n..2n`          | joint velocities over `±joint_velocity`          |
//! | `2n`             | base height over `[0, base_height]`              |
//! | `2n+1`           | base pitch over `±pitch`                         |
//! | `2n+2..2n+4`     | contact flags (left, right), 0 or 1              |
//! | `2n+4..2n+6`     | per-foot vertical force over `[0, m g]`          |
//! | `2n+6..2n+10`    | sole centers in the base frame (x, z per foot)   |
//! | `2n+10..2n+12`   | CoM velocity (x, z) over `±com_velocity`         |
//!
//! Continuous entries map their range onto `[-1, 1]` and are clamped.

use std::f64::consts::PI;

use crate::config::{ConfigError, KvConfig, KvWriter};
use crate::dynamics::centroidal::{centroidal_from, support_geometry};
use crate::dynamics::kinematics::{rotate, Kinematics};
use crate::dynamics::model::{RobotModel, Side, Vec2};
use crate::dynamics::state::SimState;

/// Affine map of `[lb, ub]` onto `[-1, 1]`, clamped outside.
pub fn normalize(value: f64, lb: f64, ub: f64) -> f64 {
    debug_assert!(lb < ub);
    (2.0 * (value - lb) / (ub - lb) - 1.0).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationRanges {
    /// rad/s
    pub joint_velocity: f64,
    /// m
    pub base_height: f64,
    /// rad
    pub pitch: f64,
    /// m
    pub feet_position: f64,
    /// m/s
    pub com_velocity: f64,
}

impl Default for ObservationRanges {
    fn default() -> Self {
        ObservationRanges {
            joint_velocity: PI,
            base_height: 0.78,
            pitch: 2.0 * PI,
            feet_position: 0.78,
            com_velocity: 3.0,
        }
    }
}

impl ObservationRanges {
    pub fn read_kv(kv: &KvConfig, prefix: &str) -> Result<Self, ConfigError> {
        let d = ObservationRanges::default();
        let r = ObservationRanges {
            joint_velocity: kv.f64_or(&format!("{prefix}joint_velocity"), d.joint_velocity)?,
            base_height: kv.f64_or(&format!("{prefix}base_height"), d.base_height)?,
            pitch: kv.f64_or(&format!("{prefix}pitch"), d.pitch)?,
            feet_position: kv.f64_or(&format!("{prefix}feet_position"), d.feet_position)?,
            com_velocity: kv.f64_or(&format!("{prefix}com_velocity"), d.com_velocity)?,
        };
        for (name, v) in [
            ("joint_velocity", r.joint_velocity),
            ("base_height", r.base_height),
            ("pitch", r.pitch),
            ("feet_position", r.feet_position),
            ("com_velocity", r.com_velocity),
        ] {
            if !(v > 0.0) {
                return Err(ConfigError::invalid(format!("{prefix}{name}"), "range must be > 0"));
            }
        }
        Ok(r)
    }

    pub fn write_kv(&self, w: &mut KvWriter, prefix: &str) {
        w.f64(&format!("{prefix}joint_velocity"), self.joint_velocity)
            .f64(&format!("{prefix}base_height"), self.base_height)
            .f64(&format!("{prefix}pitch"), self.pitch)
            .f64(&format!("{prefix}feet_position"), self.feet_position)
            .f64(&format!("{prefix}com_velocity"), self.com_velocity);
    }
}

pub fn observation_dim(n_joints: usize) -> usize {
    2 * n_joints + 12
}

/// Builds the observation. `nominal_weight` is `m g` of the un-randomized
/// model and bounds the foot force entries.
pub fn observe(model: &RobotModel, state: &SimState, ranges: &ObservationRanges, nominal_weight: f64) -> Vec<f64> {
    let kin = Kinematics::compute(model, &state.q, &state.v);
    let support = support_geometry(state);
    let cm = centroidal_from(model, &kin);
    let mut o = Vec::with_capacity(observation_dim(model.n_joints()));
    for (j, joint) in model.joints.iter().enumerate() {
        o.push(normalize(state.q[3 + j], joint.lower, joint.upper));
    }
    for j in 0..model.n_joints() {
        o.push(normalize(state.v[3 + j], -ranges.joint_velocity, ranges.joint_velocity));
    }
    o.push(normalize(state.q[1], 0.0, ranges.base_height));
    o.push(normalize(state.q[2], -ranges.pitch, ranges.pitch));
    for side in [Side::Left, Side::Right] {
        o.push(if support.foot(side).in_contact { 1.0 } else { 0.0 });
    }
    for side in [Side::Left, Side::Right] {
        o.push(normalize(support.foot(side).vertical_force, 0.0, nominal_weight));
    }
    let base = Vec2::new(state.q[0], state.q[1]);
    for side in [Side::Left, Side::Right] {
        let rel = match model.foot(side) {
            Some(f) => {
                let center = kin.point(f.link, 0.5 * (f.heel + f.toe));
                rotate(-state.q[2], center - base)
            }
            None => Vec2::zeros(),
        };
        o.push(normalize(rel.x, -ranges.feet_position, ranges.feet_position));
        o.push(normalize(rel.y, -ranges.feet_position, ranges.feet_position));
    }
    o.push(normalize(cm.com_velocity.x, -ranges.com_velocity, ranges.com_velocity));
    o.push(normalize(cm.com_velocity.y, -ranges.com_velocity, ranges.com_velocity));
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(-2.0, -2.0, 4.0), -1.0);
        assert_eq!(normalize(1.0, -2.0, 4.0), 0.0);
        assert_eq!(normalize(5.0, -2.0, 4.0), 1.0);
        assert_eq!(normalize(0.39, 0.0, 0.78), 0.0);
        assert_eq!(normalize(3.0, -3.0, 3.0), 1.0);
    }

    #[test]
    fn dimension_for_eight_joints() {
        assert_eq!(observation_dim(8), 28);
    }
}
