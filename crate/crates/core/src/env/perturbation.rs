//! Random external pushes.

use std::f64::consts::TAU;

use rand::Rng;

use crate::dynamics::integrator::ExternalForce;
use crate::dynamics::model::Vec2;
use crate::dynamics::state::PHYSICS_DT;

/// A constant force applied at a link origin over a window of physics
/// ticks `[start_tick, start_tick + duration_ticks)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceEvent {
    pub start_tick: u64,
    pub duration_ticks: u64,
    /// Direction in the sagittal plane, rad from the +x axis towards +z.
    pub direction: f64,
    pub magnitude: f64,
    pub link: usize,
}

impl ForceEvent {
    pub fn new(start: f64, duration: f64, direction: f64, magnitude: f64, link: usize) -> Self {
        ForceEvent {
            start_tick: seconds_to_ticks(start),
            duration_ticks: seconds_to_ticks(duration),
            direction,
            magnitude,
            link,
        }
    }

    pub fn start(&self) -> f64 {
        self.start_tick as f64 * PHYSICS_DT
    }

    pub fn duration(&self) -> f64 {
        self.duration_ticks as f64 * PHYSICS_DT
    }

    pub fn end_tick(&self) -> u64 {
        self.start_tick + self.duration_ticks
    }

    pub fn is_active(&self, tick: u64) -> bool {
        tick >= self.start_tick && tick < self.end_tick()
    }

    pub fn force(&self) -> Vec2 {
        self.magnitude * Vec2::new(self.direction.cos(), self.direction.sin())
    }

    pub fn external(&self) -> ExternalForce {
        ExternalForce {
            link: self.link,
            point: Vec2::zeros(),
            force: self.force(),
        }
    }

    /// Impulse per unit mass, N·s/kg.
    pub fn normalized_impulse(&self, mass: f64) -> f64 {
        self.magnitude * self.duration() / mass
    }
}

pub fn seconds_to_ticks(t: f64) -> u64 {
    (t / PHYSICS_DT).round().max(0.0) as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationConfig {
    pub enabled: bool,
    /// N
    pub magnitude: f64,
    /// s
    pub duration: f64,
    /// Mean time between pushes, s.
    pub period: f64,
    /// Link name; `base` is the floating base.
    pub link: String,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            enabled: true,
            magnitude: 200.0,
            duration: 0.2,
            period: 5.0,
            link: "base".into(),
        }
    }
}

/// Per control step of length `dt`, starts a push with probability
/// `dt / period` in a direction uniform on the circle.
pub fn schedule_perturbation<R: Rng + ?Sized>(rng: &mut R, dt: f64, cfg: &PerturbationConfig, now_tick: u64, link: usize) -> Option<ForceEvent> {
    if !cfg.enabled {
        return None;
    }
    let trigger = rng.random::<f64>() < dt / cfg.period;
    let direction = rng.random_range(0.0..TAU);
    trigger.then(|| ForceEvent {
        start_tick: now_tick,
        duration_ticks: seconds_to_ticks(cfg.duration),
        direction,
        magnitude: cfg.magnitude,
        link,
    })
}
