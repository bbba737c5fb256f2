//! Episode configuration file.

use std::f64::consts::PI;

use crate::config::{ConfigError, KvConfig, KvWriter};
use crate::dynamics::state::PHYSICS_DT;

use super::init::InitConfig;
use super::observation::ObservationRanges;
use super::perturbation::PerturbationConfig;
use super::randomization::RandomizationConfig;
use super::reward::RewardSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Control period, s. Must be a whole number of physics steps.
    pub control_dt: f64,
    /// Episode cap, s. Reaching it truncates the episode.
    pub max_duration: f64,
    /// Bound on joint velocity commands, rad/s.
    pub max_joint_speed: f64,
    pub perturbation: PerturbationConfig,
    pub randomization: RandomizationConfig,
    pub init: InitConfig,
    pub reward: RewardSpec,
    pub observation: ObservationRanges,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            control_dt: 0.04,
            max_duration: 15.0,
            max_joint_speed: PI,
            perturbation: PerturbationConfig::default(),
            randomization: RandomizationConfig::default(),
            init: InitConfig::default(),
            reward: RewardSpec::default(),
            observation: ObservationRanges::default(),
        }
    }
}

impl EnvConfig {
    /// Physics steps per control step.
    pub fn substeps(&self) -> usize {
        (self.control_dt / PHYSICS_DT).round() as usize
    }

    pub fn max_steps(&self) -> usize {
        (self.max_duration / self.control_dt).round() as usize
    }

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let d = EnvConfig::default();
        let p = &d.perturbation;
        let r = &d.randomization;
        let c = EnvConfig {
            control_dt: kv.f64_or("control_dt", d.control_dt)?,
            max_duration: kv.f64_or("max_duration", d.max_duration)?,
            max_joint_speed: kv.f64_or("max_joint_speed", d.max_joint_speed)?,
            perturbation: PerturbationConfig {
                enabled: kv.bool_or("perturbation.enabled", p.enabled)?,
                magnitude: kv.f64_or("perturbation.magnitude", p.magnitude)?,
                duration: kv.f64_or("perturbation.duration", p.duration)?,
                period: kv.f64_or("perturbation.period", p.period)?,
                link: kv.string_or("perturbation.link", &p.link),
            },
            randomization: RandomizationConfig {
                mass: kv.bool_or("randomization.mass", r.mass)?,
                friction: kv.bool_or("randomization.friction", r.friction)?,
                delay: kv.bool_or("randomization.delay", r.delay)?,
                mass_std: kv.f64_or("randomization.mass_std", r.mass_std)?,
                mass_floor: kv.f64_or("randomization.mass_floor", r.mass_floor)?,
                friction_min: kv.f64_or("randomization.friction_min", r.friction_min)?,
                friction_max: kv.f64_or("randomization.friction_max", r.friction_max)?,
                max_delay: kv.f64_or("randomization.max_delay", r.max_delay)?,
            },
            init: InitConfig {
                sigma_position: kv.f64_or("init.sigma_position", d.init.sigma_position)?,
                sigma_velocity: kv.f64_or("init.sigma_velocity", d.init.sigma_velocity)?,
            },
            reward: RewardSpec::read_kv(kv, "reward.")?,
            observation: ObservationRanges::read_kv(kv, "observation.")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let kv = KvConfig::parse(text)?;
        let c = Self::from_kv(&kv)?;
        kv.finish()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let steps = self.control_dt / PHYSICS_DT;
        if !(self.control_dt > 0.0) || (steps - steps.round()).abs() > 1e-9 {
            return Err(ConfigError::invalid("control_dt", "must be a positive multiple of 0.001 s"));
        }
        if !(self.max_duration > 0.0) {
            return Err(ConfigError::invalid("max_duration", "must be > 0"));
        }
        if !(self.max_joint_speed > 0.0) {
            return Err(ConfigError::invalid("max_joint_speed", "must be > 0"));
        }
        let p = &self.perturbation;
        if !(p.magnitude >= 0.0) {
            return Err(ConfigError::invalid("perturbation.magnitude", "must be >= 0"));
        }
        if !(p.duration > 0.0) {
            return Err(ConfigError::invalid("perturbation.duration", "must be > 0"));
        }
        if !(p.period > 0.0) {
            return Err(ConfigError::invalid("perturbation.period", "must be > 0"));
        }
        let r = &self.randomization;
        if !(r.mass_std >= 0.0) {
            return Err(ConfigError::invalid("randomization.mass_std", "must be >= 0"));
        }
        if !(r.mass_floor > 0.0) {
            return Err(ConfigError::invalid("randomization.mass_floor", "must be > 0"));
        }
        if !(r.friction_min > 0.0 && r.friction_min <= r.friction_max) {
            return Err(ConfigError::invalid("randomization.friction_min", "need 0 < min <= max"));
        }
        if !(r.max_delay >= 0.0) {
            return Err(ConfigError::invalid("randomization.max_delay", "must be >= 0"));
        }
        if !(self.init.sigma_position >= 0.0) {
            return Err(ConfigError::invalid("init.sigma_position", "must be >= 0"));
        }
        if !(self.init.sigma_velocity >= 0.0) {
            return Err(ConfigError::invalid("init.sigma_velocity", "must be >= 0"));
        }
        self.reward.validate("reward.")
    }

    /// Canonical text form; every key is written.
    pub fn to_kv_string(&self) -> String {
        let mut w = KvWriter::new();
        w.comment("episode configuration (SI units, radians)");
        w.f64("control_dt", self.control_dt)
            .f64("max_duration", self.max_duration)
            .f64("max_joint_speed", self.max_joint_speed);
        let p = &self.perturbation;
        w.bool("perturbation.enabled", p.enabled)
            .f64("perturbation.magnitude", p.magnitude)
            .f64("perturbation.duration", p.duration)
            .f64("perturbation.period", p.period)
            .str("perturbation.link", &p.link);
        let r = &self.randomization;
        w.bool("randomization.mass", r.mass)
            .bool("randomization.friction", r.friction)
            .bool("randomization.delay", r.delay)
            .f64("randomization.mass_std", r.mass_std)
            .f64("randomization.mass_floor", r.mass_floor)
            .f64("randomization.friction_min", r.friction_min)
            .f64("randomization.friction_max", r.friction_max)
            .f64("randomization.max_delay", r.max_delay);
        w.f64("init.sigma_position", self.init.sigma_position)
            .f64("init.sigma_velocity", self.init.sigma_velocity);
        self.reward.write_kv(&mut w, "reward.");
        self.observation.write_kv(&mut w, "observation.");
        w.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = EnvConfig::default();
        assert_eq!(c.substeps(), 40);
        assert_eq!(c.max_steps(), 375);
    }

    #[test]
    fn round_trip_and_errors() {
        let mut c = EnvConfig::default();
        c.perturbation.link = "torso".into();
        c.randomization.delay = false;
        assert_eq!(EnvConfig::parse(&c.to_kv_string()).unwrap(), c);
        assert!(matches!(
            EnvConfig::parse("control_dt = 0.0405"),
            Err(ConfigError::Invalid { field, .. }) if field == "control_dt"
        ));
        assert!(matches!(EnvConfig::parse("max_durration = 3"), Err(ConfigError::UnknownKey { .. })));
    }
}
