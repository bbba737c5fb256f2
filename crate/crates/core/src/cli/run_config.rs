//! Run files: one `key = value` document naming the model and episode
//! configuration files plus inline overrides.
//!
//! ```text
//! model_config = model.cfg        # optional, relative to this file
//! env_config = env.cfg            # optional
//! ppo_config = ppo.cfg            # optional
//! seed = 3
//! steps = 200000
//! out_dir = runs/balance
//! ppo.batch_size = 5000           # inline overrides win over ppo_config
//! env.perturbation.enabled = false
//! sweep.repetitions = 5
//! endurance.episodes = 50
//! ```

use std::path::{Path, PathBuf};

use crate::config::{ConfigError, KvConfig, KvWriter};
use crate::dynamics::model::ModelConfig;
use crate::env::EnvConfig;
use crate::eval::{EnduranceConfig, SweepConfig};
use crate::ppo::PpoConfig;

pub const DEFAULT_STEPS: u64 = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub seed: u64,
    pub steps: u64,
    pub out_dir: Option<PathBuf>,
    pub sweep: SweepConfig,
    pub endurance: EnduranceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            seed: 0,
            steps: DEFAULT_STEPS,
            out_dir: None,
            sweep: SweepConfig::default(),
            endurance: EnduranceConfig::default(),
        }
    }
}

fn read_text(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Env keys given inline as `env.<key>` are layered over the env file.
fn layered_env(base: &str, kv: &KvConfig) -> Result<EnvConfig, ConfigError> {
    let mut merged = KvConfig::parse(base)?;
    merged.overlay(kv.take_prefix("env."));
    let c = EnvConfig::from_kv(&merged)?;
    merged.finish().map_err(|e| match e {
        ConfigError::UnknownKey { key, line } => ConfigError::UnknownKey {
            key: format!("env.{key}"),
            line,
        },
        e => e,
    })?;
    Ok(c)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read_text(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &dir)
    }

    /// Parses a run file whose relative paths resolve against `dir`.
    pub fn parse(text: &str, dir: &Path) -> Result<Self, ConfigError> {
        let kv = KvConfig::parse(text)?;
        let resolve = |p: String| -> PathBuf {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                dir.join(p)
            }
        };
        let model = match kv.raw("model_config") {
            Some(p) => ModelConfig::parse(&read_text(&resolve(p.to_string()))?)?,
            None => ModelConfig::default(),
        };
        let env_text = match kv.raw("env_config") {
            Some(p) => read_text(&resolve(p.to_string()))?,
            None => String::new(),
        };
        let env = layered_env(&env_text, &kv)?;
        let ppo_base = match kv.raw("ppo_config") {
            Some(p) => PpoConfig::parse(&read_text(&resolve(p.to_string()))?)?,
            None => PpoConfig::default(),
        };
        let ppo = PpoConfig::read_kv(&kv, "ppo.", &ppo_base)?;
        let c = RunConfig {
            model,
            env,
            ppo,
            seed: kv.u64_or("seed", 0)?,
            steps: kv.u64_or("steps", DEFAULT_STEPS)?,
            out_dir: kv.raw("out_dir").map(|p| resolve(p.to_string())),
            sweep: SweepConfig::read_kv(&kv, "sweep.")?,
            endurance: EnduranceConfig::read_kv(&kv, "endurance.")?,
        };
        kv.finish()?;
        Ok(c)
    }

    /// Self-contained text form with every setting inline.
    pub fn to_kv_string(&self) -> String {
        let mut w = KvWriter::new();
        w.comment("resolved run configuration");
        w.int("seed", self.seed).int("steps", self.steps);
        if let Some(d) = &self.out_dir {
            w.str("out_dir", &d.display().to_string());
        }
        self.ppo.write_kv(&mut w, "ppo.");
        w.int("ppo.workers", self.ppo.workers)
            .int("ppo.checkpoint_interval", self.ppo.checkpoint_interval);
        self.sweep.write_kv(&mut w, "sweep.");
        self.endurance.write_kv(&mut w, "endurance.");
        let mut s = w.finish();
        for line in self.env.to_kv_string().lines() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            s.push_str("env.");
            s.push_str(line);
            s.push('\n');
        }
        s
    }
}
