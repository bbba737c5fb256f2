//! Consecutive random pushes until a fall or the episode cap.

use std::fmt::Write as _;

use crate::config::{ConfigError, KvConfig, KvWriter};
use crate::dynamics::model::ModelConfig;
use crate::env::{resolve_link, Env, EnvConfig, EnvError, PerturbationConfig};

use super::scenario::{episode_seed, run_scenario, Policy, Scenario};
use super::sweep::eval_env_config;
use super::{run_jobs, CsvMeta, EvalError};

#[derive(Debug, Clone, PartialEq)]
pub struct EnduranceConfig {
    /// N
    pub magnitudes: Vec<f64>,
    /// s
    pub durations: Vec<f64>,
    pub links: Vec<String>,
    pub episodes: usize,
    /// s
    pub cap: f64,
    /// Mean time between pushes, s.
    pub period: f64,
    pub pose_sigma_deg: f64,
    pub seed: u64,
}

impl Default for EnduranceConfig {
    fn default() -> Self {
        EnduranceConfig {
            magnitudes: vec![100.0, 200.0, 300.0],
            durations: vec![0.1, 0.2, 0.3],
            links: vec!["base".into(), "torso".into(), "arm".into()],
            episodes: 50,
            cap: 60.0,
            period: 3.0,
            pose_sigma_deg: 2.0,
            seed: 0,
        }
    }
}

impl EnduranceConfig {
    pub fn read_kv(kv: &KvConfig, prefix: &str) -> Result<Self, ConfigError> {
        let d = EnduranceConfig::default();
        let k = |n: &str| format!("{prefix}{n}");
        let links = kv.string_or(&k("links"), &d.links.join(", "));
        let c = EnduranceConfig {
            magnitudes: kv.f64_list_or(&k("magnitudes"), &d.magnitudes)?,
            durations: kv.f64_list_or(&k("durations"), &d.durations)?,
            links: links.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            episodes: kv.usize_or(&k("episodes"), d.episodes)?,
            cap: kv.f64_or(&k("cap"), d.cap)?,
            period: kv.f64_or(&k("period"), d.period)?,
            pose_sigma_deg: kv.f64_or(&k("pose_sigma_deg"), d.pose_sigma_deg)?,
            seed: kv.u64_or(&k("seed"), d.seed)?,
        };
        c.validate(prefix)?;
        Ok(c)
    }

    pub fn write_kv(&self, w: &mut KvWriter, prefix: &str) {
        let k = |n: &str| format!("{prefix}{n}");
        w.f64_list(&k("magnitudes"), &self.magnitudes)
            .f64_list(&k("durations"), &self.durations)
            .str(&k("links"), &self.links.join(", "))
            .int(&k("episodes"), self.episodes)
            .f64(&k("cap"), self.cap)
            .f64(&k("period"), self.period)
            .f64(&k("pose_sigma_deg"), self.pose_sigma_deg)
            .int(&k("seed"), self.seed);
    }

    pub fn validate(&self, prefix: &str) -> Result<(), ConfigError> {
        let bad = |f: &str, r: &str| Err(ConfigError::invalid(format!("{prefix}{f}"), r));
        if self.magnitudes.is_empty() || self.magnitudes.iter().any(|m| !(*m >= 0.0)) {
            return bad("magnitudes", "need non-negative magnitudes");
        }
        if self.durations.is_empty() || self.durations.iter().any(|d| !(*d > 0.0)) {
            return bad("durations", "need positive durations");
        }
        if self.links.is_empty() {
            return bad("links", "need at least one link");
        }
        if self.episodes == 0 {
            return bad("episodes", "must be >= 1");
        }
        if !(self.period > 0.0) {
            return bad("period", "must be > 0");
        }
        if !(self.cap > self.period) {
            return bad("cap", "must exceed the push period");
        }
        if !(self.pose_sigma_deg >= 0.0) {
            return bad("pose_sigma_deg", "must be >= 0");
        }
        Ok(())
    }

    /// Cells in output order: link, then magnitude, then duration.
    pub fn cells(&self) -> Vec<(String, f64, f64)> {
        let mut out = Vec::new();
        for l in &self.links {
            for &m in &self.magnitudes {
                for &d in &self.durations {
                    out.push((l.clone(), m, d));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnduranceCell {
    pub link: String,
    pub magnitude: f64,
    pub duration: f64,
    /// Endured applications per episode, in episode order.
    pub counts: Vec<usize>,
    /// Scheduled applications per episode.
    pub applications: Vec<usize>,
    pub survived: usize,
}

impl EnduranceCell {
    pub fn mean(&self) -> f64 {
        self.counts.iter().sum::<usize>() as f64 / self.counts.len().max(1) as f64
    }

    pub fn median(&self) -> f64 {
        let mut c = self.counts.clone();
        c.sort_unstable();
        match c.len() {
            0 => 0.0,
            n if n % 2 == 1 => c[n / 2] as f64,
            n => (c[n / 2 - 1] + c[n / 2]) as f64 / 2.0,
        }
    }

    pub fn max(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn mean_applications(&self) -> f64 {
        self.applications.iter().sum::<usize>() as f64 / self.applications.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnduranceResult {
    pub config: EnduranceConfig,
    pub cells: Vec<EnduranceCell>,
}

impl EnduranceResult {
    pub fn cell(&self, link: &str, magnitude: f64, duration: f64) -> Option<&EnduranceCell> {
        self.cells.iter().find(|c| c.link == link && c.magnitude == magnitude && c.duration == duration)
    }

    pub fn to_csv(&self, meta: &CsvMeta) -> String {
        let mut s = meta.preamble();
        s.push_str("link,magnitude,duration,episodes,survived,mean_endured,median_endured,max_endured,endured_counts\n");
        for c in &self.cells {
            let counts: Vec<String> = c.counts.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                c.link,
                c.magnitude,
                c.duration,
                c.counts.len(),
                c.survived,
                c.mean(),
                c.median(),
                c.max(),
                counts.join(";")
            );
        }
        s
    }
}

/// Environment settings for one endurance cell: random pushes on `link`,
/// no domain randomization, pose noise only.
pub fn endurance_env_config(base: &EnvConfig, cfg: &EnduranceConfig, link: &str, magnitude: f64, duration: f64) -> EnvConfig {
    let mut c = eval_env_config(base, cfg.pose_sigma_deg, cfg.cap);
    c.perturbation = PerturbationConfig {
        enabled: true,
        magnitude,
        duration,
        period: cfg.period,
        link: link.to_string(),
    };
    c
}

/// Runs `episodes` seeded episodes per (link, magnitude, duration) cell and
/// counts the pushes endured in each.
pub fn endurance_eval(
    policy: &dyn Policy,
    model_config: &ModelConfig,
    env_config: &EnvConfig,
    cfg: &EnduranceConfig,
    workers: usize,
) -> Result<EnduranceResult, EvalError> {
    cfg.validate("")?;
    let cells = cfg.cells();
    let mut env_cfgs = Vec::with_capacity(cells.len());
    for (link, m, d) in &cells {
        let c = endurance_env_config(env_config, cfg, link, *m, *d);
        let probe = Env::new(model_config.clone(), c.clone(), 0)?;
        resolve_link(probe.nominal(), link)?;
        env_cfgs.push(c);
    }
    let n = cfg.episodes;
    let outcomes = run_jobs(cells.len() * n, workers, |job| -> Result<(usize, usize, bool), EnvError> {
        let (cell, ep) = (job / n, job % n);
        let mut env = Env::new(model_config.clone(), env_cfgs[cell].clone(), 0)?;
        let r = run_scenario(&mut env, policy, &Scenario::default(), |a| episode_seed(cfg.seed, cell as u64, ep as u64, a))?;
        Ok((r.endured, r.applications, r.survived))
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    let cells = outcomes
        .chunks(n)
        .zip(cells)
        .map(|(chunk, (link, magnitude, duration))| EnduranceCell {
            link,
            magnitude,
            duration,
            counts: chunk.iter().map(|o| o.0).collect(),
            applications: chunk.iter().map(|o| o.1).collect(),
            survived: chunk.iter().filter(|o| o.2).count(),
        })
        .collect();
    Ok(EnduranceResult { config: cfg.clone(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::scenario::HoldPolicy;

    fn zero_push(episodes: usize, cap: f64) -> EnduranceConfig {
        EnduranceConfig {
            magnitudes: vec![0.0],
            durations: vec![0.2],
            links: vec!["base".into()],
            episodes,
            cap,
            ..EnduranceConfig::default()
        }
    }

    #[test]
    fn zero_magnitude_counts_every_completed_push() {
        let cfg = zero_push(4, 12.0);
        let r = endurance_eval(&HoldPolicy { joints: 8 }, &ModelConfig::default(), &EnvConfig::default(), &cfg, 2).unwrap();
        let c = &r.cells[0];
        assert_eq!(c.survived, 4);
        for (n, a) in c.counts.iter().zip(&c.applications) {
            assert!(*n == *a || *n + 1 == *a);
        }
        assert!(c.mean_applications() > 1.0);
    }

    #[test]
    fn seeded_runs_repeat() {
        let mut cfg = zero_push(3, 6.0);
        cfg.magnitudes = vec![150.0];
        let hold = HoldPolicy { joints: 8 };
        let a = endurance_eval(&hold, &ModelConfig::default(), &EnvConfig::default(), &cfg, 1).unwrap();
        let b = endurance_eval(&hold, &ModelConfig::default(), &EnvConfig::default(), &cfg, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn statistics() {
        let c = EnduranceCell {
            link: "base".into(),
            magnitude: 0.0,
            duration: 0.2,
            counts: vec![3, 1, 4, 2],
            applications: vec![3, 2, 4, 3],
            survived: 1,
        };
        assert_eq!(c.mean(), 2.5);
        assert_eq!(c.median(), 2.5);
        assert_eq!(c.max(), 4);
    }

    #[test]
    fn config_round_trip() {
        let c = EnduranceConfig::default();
        let mut w = KvWriter::new();
        c.write_kv(&mut w, "endurance.");
        let kv = KvConfig::parse(&w.finish()).unwrap();
        assert_eq!(EnduranceConfig::read_kv(&kv, "endurance.").unwrap(), c);
        assert!(EnduranceConfig { cap: 2.0, ..c }.validate("").is_err());
    }
}
