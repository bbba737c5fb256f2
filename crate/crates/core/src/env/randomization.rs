//! Per-episode randomization of physical parameters.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::model::RobotModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizationConfig {
    pub mass: bool,
    pub friction: bool,
    pub delay: bool,
    /// Standard deviation of link masses relative to nominal.
    pub mass_std: f64,
    /// Lower truncation of link masses relative to nominal.
    pub mass_floor: f64,
    pub friction_min: f64,
    pub friction_max: f64,
    /// s
    pub max_delay: f64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        RandomizationConfig {
            mass: true,
            friction: true,
            delay: true,
            mass_std: 0.2,
            mass_floor: 0.1,
            friction_min: 0.5,
            friction_max: 3.0,
            max_delay: 0.02,
        }
    }
}

impl RandomizationConfig {
    pub fn disabled() -> Self {
        RandomizationConfig {
            mass: false,
            friction: false,
            delay: false,
            ..Default::default()
        }
    }
}

/// Samples an episode model. Link inertias scale with their mass.
pub fn randomize_domain<R: Rng + ?Sized>(nominal: &RobotModel, rng: &mut R, cfg: &RandomizationConfig) -> RobotModel {
    let mut m = nominal.clone();
    if cfg.mass {
        for link in &mut m.links {
            let z: f64 = rng.sample(StandardNormal);
            let m0 = link.mass;
            let mass = (m0 * (1.0 + cfg.mass_std * z)).max(cfg.mass_floor * m0);
            link.inertia *= mass / m0;
            link.mass = mass;
        }
        m.refresh_mass();
    }
    if cfg.friction {
        m.contact.friction = rng.random_range(cfg.friction_min..=cfg.friction_max);
    }
    if cfg.delay {
        m.actuation_delay = rng.random_range(0.0..=cfg.max_delay);
    }
    m
}
