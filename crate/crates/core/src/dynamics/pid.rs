//! Joint position PIDs.
//!
//! The derivative acts on the measured joint velocity (`ė = -ṡ`), so a
//! reference change produces no derivative kick.

use super::model::RobotModel;
use super::state::PidState;

/// Advances the integral by one step of length `dt` and returns the torques
/// `k_p e + k_i ∫e + k_d ė`.
pub fn pid_torques(model: &RobotModel, pid: &mut PidState, joints: &[f64], joint_velocities: &[f64], refs: &[f64], dt: f64) -> Vec<f64> {
    model
        .joints
        .iter()
        .enumerate()
        .map(|(j, joint)| {
            let e = refs[j] - joints[j];
            pid.integral[j] += e * dt;
            let g = joint.gains;
            let tau = g.kp * e + g.ki * pid.integral[j] - g.kd * joint_velocities[j];
            match model.torque_limit {
                Some(lim) => tau.clamp(-lim, lim),
                None => tau,
            }
        })
        .collect()
}
