//! Deterministic push sweep over directions and magnitudes.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, KvConfig, KvWriter};
use crate::dynamics::model::ModelConfig;
use crate::env::{resolve_link, Env, EnvConfig, EnvError, ForceEvent, InitConfig, RandomizationConfig};

use super::scenario::{episode_seed, run_scenario, Policy, Scenario};
use super::{run_jobs, CsvMeta, EvalError};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// N, ascending.
    pub magnitudes: Vec<f64>,
    /// rad in the sagittal plane; 0 pushes forward.
    pub directions: Vec<f64>,
    pub repetitions: usize,
    /// Initial joint angle noise, deg.
    pub pose_sigma_deg: f64,
    /// s
    pub push_time: f64,
    /// s
    pub push_duration: f64,
    /// s
    pub horizon: f64,
    /// CoM speed bound at push time, m/s.
    pub settle_speed: f64,
    pub max_attempts: usize,
    pub friction: Option<f64>,
    pub link: String,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            magnitudes: (0..27).map(|i| 50.0 + 25.0 * i as f64).collect(),
            directions: vec![0.0, PI],
            repetitions: 5,
            pose_sigma_deg: 2.0,
            push_time: 3.0,
            push_duration: 0.2,
            horizon: 7.0,
            settle_speed: 0.05,
            max_attempts: 10,
            friction: None,
            link: "base".to_string(),
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn read_kv(kv: &KvConfig, prefix: &str) -> Result<Self, ConfigError> {
        let d = SweepConfig::default();
        let k = |n: &str| format!("{prefix}{n}");
        let friction = kv.f64_or(&k("friction"), -1.0)?;
        let c = SweepConfig {
            magnitudes: kv.f64_list_or(&k("magnitudes"), &d.magnitudes)?,
            directions: kv.f64_list_or(&k("directions"), &d.directions)?,
            repetitions: kv.usize_or(&k("repetitions"), d.repetitions)?,
            pose_sigma_deg: kv.f64_or(&k("pose_sigma_deg"), d.pose_sigma_deg)?,
            push_time: kv.f64_or(&k("push_time"), d.push_time)?,
            push_duration: kv.f64_or(&k("push_duration"), d.push_duration)?,
            horizon: kv.f64_or(&k("horizon"), d.horizon)?,
            settle_speed: kv.f64_or(&k("settle_speed"), d.settle_speed)?,
            max_attempts: kv.usize_or(&k("max_attempts"), d.max_attempts)?,
            friction: (friction > 0.0).then_some(friction),
            link: kv.string_or(&k("link"), &d.link),
            seed: kv.u64_or(&k("seed"), d.seed)?,
        };
        c.validate(prefix)?;
        Ok(c)
    }

    pub fn write_kv(&self, w: &mut KvWriter, prefix: &str) {
        let k = |n: &str| format!("{prefix}{n}");
        w.f64_list(&k("magnitudes"), &self.magnitudes)
            .f64_list(&k("directions"), &self.directions)
            .int(&k("repetitions"), self.repetitions)
            .f64(&k("pose_sigma_deg"), self.pose_sigma_deg)
            .f64(&k("push_time"), self.push_time)
            .f64(&k("push_duration"), self.push_duration)
            .f64(&k("horizon"), self.horizon)
            .f64(&k("settle_speed"), self.settle_speed)
            .int(&k("max_attempts"), self.max_attempts);
        if let Some(f) = self.friction {
            w.f64(&k("friction"), f);
        }
        w.str(&k("link"), &self.link).int(&k("seed"), self.seed);
    }

    pub fn validate(&self, prefix: &str) -> Result<(), ConfigError> {
        let bad = |f: &str, r: &str| Err(ConfigError::invalid(format!("{prefix}{f}"), r));
        if self.magnitudes.is_empty() || self.magnitudes.iter().any(|m| !(*m > 0.0)) {
            return bad("magnitudes", "need positive magnitudes");
        }
        if self.magnitudes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("magnitudes", "must be ascending");
        }
        if self.directions.is_empty() {
            return bad("directions", "need at least one direction");
        }
        if self.repetitions == 0 {
            return bad("repetitions", "must be >= 1");
        }
        if !(self.push_time > 0.0 && self.push_duration > 0.0) {
            return bad("push_time", "push time and duration must be > 0");
        }
        if !(self.horizon > self.push_time + self.push_duration) {
            return bad("horizon", "must end after the push");
        }
        if !(self.pose_sigma_deg >= 0.0) {
            return bad("pose_sigma_deg", "must be >= 0");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts", "must be >= 1");
        }
        Ok(())
    }

    pub fn episodes(&self) -> usize {
        self.directions.len() * self.magnitudes.len() * self.repetitions
    }
}

/// Environment and model settings for deterministic evaluation: no domain
/// randomization, no random pushes, pose noise only.
pub fn eval_env_config(base: &EnvConfig, pose_sigma_deg: f64, duration: f64) -> EnvConfig {
    let mut c = base.clone();
    c.perturbation.enabled = false;
    c.randomization = RandomizationConfig::disabled();
    c.init = InitConfig {
        sigma_position: pose_sigma_deg.to_radians(),
        sigma_velocity: 0.0,
    };
    c.max_duration = duration;
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub direction: f64,
    pub magnitude: f64,
    pub successes: usize,
    pub repetitions: usize,
    /// Start attempts summed over repetitions.
    pub attempts: usize,
}

impl SweepCell {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.repetitions as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Direction-major, magnitudes ascending.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, direction: usize, magnitude: usize) -> &SweepCell {
        &self.cells[direction * self.config.magnitudes.len() + magnitude]
    }

    /// Success rate per magnitude, averaged over directions.
    pub fn rate_by_magnitude(&self) -> Vec<f64> {
        let nd = self.config.directions.len();
        (0..self.config.magnitudes.len())
            .map(|m| (0..nd).map(|d| self.cell(d, m).success_rate()).sum::<f64>() / nd as f64)
            .collect()
    }

    pub fn to_csv(&self, meta: &CsvMeta) -> String {
        let mut s = meta.preamble();
        s.push_str("direction,magnitude,successes,repetitions,success_rate\n");
        for c in &self.cells {
            let _ = writeln!(s, "{},{},{},{},{}", c.direction, c.magnitude, c.successes, c.repetitions, c.success_rate());
        }
        s
    }
}

/// Runs every (direction, magnitude, repetition) episode: settle for
/// `push_time` (resampling the start while the CoM moves faster than
/// `settle_speed`), push once, and succeed if no non-foot link touches the
/// ground before `horizon`.
pub fn polar_sweep(
    policy: &dyn Policy,
    model_config: &ModelConfig,
    env_config: &EnvConfig,
    cfg: &SweepConfig,
    workers: usize,
) -> Result<SweepResult, EvalError> {
    cfg.validate("")?;
    let mut model_config = model_config.clone();
    if let Some(mu) = cfg.friction {
        model_config.contact.friction = mu;
    }
    let env_cfg = eval_env_config(env_config, cfg.pose_sigma_deg, cfg.horizon);
    let probe = Env::new(model_config.clone(), env_cfg.clone(), 0)?;
    let link = resolve_link(probe.nominal(), &cfg.link)?;
    let nm = cfg.magnitudes.len();
    let reps = cfg.repetitions;
    let outcomes = run_jobs(cfg.episodes(), workers, |job| -> Result<(bool, usize), EnvError> {
        let cell = job / reps;
        let rep = job % reps;
        let (d, m) = (cell / nm, cell % nm);
        let mut env = Env::new(model_config.clone(), env_cfg.clone(), 0)?;
        let scenario = Scenario {
            scripted: vec![ForceEvent::new(cfg.push_time, cfg.push_duration, cfg.directions[d], cfg.magnitudes[m], link)],
            settle: Some((cfg.push_time, cfg.settle_speed)),
            max_attempts: cfg.max_attempts,
            record_trace: false,
        };
        let r = run_scenario(&mut env, policy, &scenario, |a| episode_seed(cfg.seed, cell as u64, rep as u64, a))?;
        Ok((r.survived, r.attempts))
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    let cells = outcomes
        .chunks(reps)
        .enumerate()
        .map(|(cell, chunk)| SweepCell {
            direction: cfg.directions[cell / nm],
            magnitude: cfg.magnitudes[cell % nm],
            successes: chunk.iter().filter(|(ok, _)| *ok).count(),
            repetitions: reps,
            attempts: chunk.iter().map(|(_, a)| a).sum(),
        })
        .collect();
    Ok(SweepResult { config: cfg.clone(), cells })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendTest {
    /// Kendall rank correlation between magnitude and success rate.
    pub tau: f64,
    /// Permutation p-value of a correlation at least this positive.
    pub p_increasing: f64,
}

/// One-sided permutation test for an increasing trend of `rates` along their
/// index.
pub fn trend_test(rates: &[f64], permutations: usize, seed: u64) -> TrendTest {
    let tau = kendall_tau(rates);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = rates.to_vec();
    let mut hits = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        if kendall_tau(&shuffled) >= tau - 1e-12 {
            hits += 1;
        }
    }
    TrendTest {
        tau,
        p_increasing: (hits + 1) as f64 / (permutations + 1) as f64,
    }
}

/// Kendall's tau-b of `ys` against their index.
fn kendall_tau(ys: &[f64]) -> f64 {
    let n = ys.len();
    let (mut s, mut ties) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let d = ys[j] - ys[i];
            if d > 0.0 {
                s += 1;
            } else if d < 0.0 {
                s -= 1;
            } else {
                ties += 1;
            }
        }
    }
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    let denom = (pairs * (pairs - ties as f64)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        s as f64 / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::scenario::HoldPolicy;

    #[test]
    fn default_grid_shape() {
        let c = SweepConfig::default();
        assert_eq!(c.magnitudes.len(), 27);
        assert_eq!(c.magnitudes[26], 700.0);
        assert_eq!(c.episodes(), 270);
    }

    #[test]
    fn config_round_trip() {
        let c = SweepConfig {
            friction: Some(0.2),
            ..SweepConfig::default()
        };
        let mut w = KvWriter::new();
        c.write_kv(&mut w, "sweep.");
        let kv = KvConfig::parse(&w.finish()).unwrap();
        assert_eq!(SweepConfig::read_kv(&kv, "sweep.").unwrap(), c);
        kv.finish().unwrap();
    }

    #[test]
    fn trend_detection() {
        let up: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        assert!(trend_test(&up, 999, 1).p_increasing < 0.01);
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert!(trend_test(&down, 999, 1).p_increasing > 0.99);
        assert_eq!(trend_test(&[1.0; 5], 99, 1).tau, 0.0);
    }

    #[test]
    fn small_sweep_is_reproducible_across_workers() {
        let cfg = SweepConfig {
            magnitudes: vec![40.0, 2000.0],
            directions: vec![0.0],
            repetitions: 2,
            horizon: 4.0,
            max_attempts: 2,
            seed: 4,
            ..SweepConfig::default()
        };
        let hold = HoldPolicy { joints: 8 };
        let a = polar_sweep(&hold, &ModelConfig::default(), &EnvConfig::default(), &cfg, 1).unwrap();
        let b = polar_sweep(&hold, &ModelConfig::default(), &EnvConfig::default(), &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 2);
        assert_eq!(a.cells[0].successes, 2);
        assert_eq!(a.cells[1].successes, 0);
    }
}
