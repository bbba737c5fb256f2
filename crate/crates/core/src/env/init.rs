//! Initial state distribution.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::ground_touching_height;
use crate::dynamics::model::RobotModel;
use crate::dynamics::state::SimState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    /// Joint angle noise, rad.
    pub sigma_position: f64,
    /// Joint velocity noise, rad/s.
    pub sigma_velocity: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            sigma_position: 10f64.to_radians(),
            sigma_velocity: 90f64.to_radians(),
        }
    }
}

/// Joint angles and velocities drawn around the home posture. The base sits
/// at the nominal standing height and zero pitch, raised only if the
/// sampled legs would put a sole point below the ground.
pub fn sample_initial_state<R: Rng + ?Sized>(model: &RobotModel, rng: &mut R, cfg: &InitConfig) -> SimState {
    let mut joints = Vec::with_capacity(model.n_joints());
    let mut velocities = Vec::with_capacity(model.n_joints());
    for (joint, &home) in model.joints.iter().zip(&model.home) {
        let zp: f64 = rng.sample(StandardNormal);
        let zv: f64 = rng.sample(StandardNormal);
        joints.push(joint.clamp(home + cfg.sigma_position * zp));
        velocities.push((cfg.sigma_velocity * zv).clamp(-joint.velocity_limit, joint.velocity_limit));
    }
    let nominal = ground_touching_height(model, &model.home);
    let z = nominal.max(ground_touching_height(model, &joints));
    let mut s = SimState::new(model, [0.0, z, 0.0], &joints);
    s.v[3..].copy_from_slice(&velocities);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::{build_model, ModelConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_noise_is_home_at_rest() {
        let m = build_model(&ModelConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = sample_initial_state(
            &m,
            &mut rng,
            &InitConfig {
                sigma_position: 0.0,
                sigma_velocity: 0.0,
            },
        );
        assert_eq!(s.joints(), &m.home[..]);
        assert!(s.v.iter().all(|&v| v == 0.0));
        let lowest = s.contacts.iter().map(|c| c.position.y).fold(f64::INFINITY, f64::min);
        assert!(lowest.abs() < 1e-12);
    }

    #[test]
    fn sample_moments() {
        let mut cfg = ModelConfig::default();
        // Wide limits keep clamping out of the moment estimates.
        for j in [&mut cfg.torso_joint, &mut cfg.shoulder, &mut cfg.hip, &mut cfg.knee, &mut cfg.ankle] {
            j.lower = j.home - 2.0;
            j.upper = j.home + 2.0;
        }
        let m = build_model(&cfg).unwrap();
        let ic = InitConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let mut sum = [0.0; 8];
        let mut sq = [0.0; 8];
        for _ in 0..n {
            let s = sample_initial_state(&m, &mut rng, &ic);
            for j in 0..8 {
                let d = s.joints()[j] - m.home[j];
                sum[j] += d;
                sq[j] += d * d;
            }
        }
        for j in 0..8 {
            let mean = sum[j] / n as f64;
            let sd = (sq[j] / n as f64 - mean * mean).sqrt();
            assert!(mean.abs() < 0.5f64.to_radians(), "joint {j} mean {mean}");
            assert!((sd - ic.sigma_position).abs() < 0.1 * ic.sigma_position, "joint {j} sd {sd}");
        }
    }

    #[test]
    fn short_legs_start_airborne() {
        let m = build_model(&ModelConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut airborne = 0;
        for _ in 0..200 {
            let s = sample_initial_state(&m, &mut rng, &InitConfig::default());
            let lowest = s.contacts.iter().map(|c| c.position.y).fold(f64::INFINITY, f64::min);
            assert!(lowest >= -1e-12);
            if lowest > 1e-6 {
                airborne += 1;
            }
        }
        assert!(airborne > 0);
    }
}
