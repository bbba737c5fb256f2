use crate::config::{ConfigError, KvConfig, KvWriter};

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub workers: usize,
    /// Bound on the value update, in return units.
    pub value_clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub kl_penalty: bool,
    pub kl_coeff: f64,
    pub kl_target: f64,
    pub normalize_advantages: bool,
    pub hidden: Vec<usize>,
    pub initial_std: f64,
    /// Iterations between checkpoints; the final one is always written.
    pub checkpoint_interval: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.95,
            lambda: 1.0,
            clip: 0.3,
            learning_rate: 1e-4,
            batch_size: 10_000,
            minibatch_size: 512,
            epochs: 32,
            workers: 4,
            value_clip: 1000.0,
            value_coef: 0.5,
            entropy_coef: 0.0,
            kl_penalty: true,
            kl_coeff: 0.2,
            kl_target: 0.01,
            normalize_advantages: true,
            hidden: vec![128, 64],
            initial_std: 0.3,
            checkpoint_interval: 5,
        }
    }
}

impl PpoConfig {
    /// Reads `prefix`-qualified keys, falling back to `base`.
    pub fn read_kv(kv: &KvConfig, prefix: &str, base: &PpoConfig) -> Result<Self, ConfigError> {
        let k = |name: &str| format!("{prefix}{name}");
        let c = PpoConfig {
            gamma: kv.f64_or(&k("gamma"), base.gamma)?,
            lambda: kv.f64_or(&k("lambda"), base.lambda)?,
            clip: kv.f64_or(&k("clip"), base.clip)?,
            learning_rate: kv.f64_or(&k("learning_rate"), base.learning_rate)?,
            batch_size: kv.usize_or(&k("batch_size"), base.batch_size)?,
            minibatch_size: kv.usize_or(&k("minibatch_size"), base.minibatch_size)?,
            epochs: kv.usize_or(&k("epochs"), base.epochs)?,
            workers: kv.usize_or(&k("workers"), base.workers)?,
            value_clip: kv.f64_or(&k("value_clip"), base.value_clip)?,
            value_coef: kv.f64_or(&k("value_coef"), base.value_coef)?,
            entropy_coef: kv.f64_or(&k("entropy_coef"), base.entropy_coef)?,
            kl_penalty: kv.bool_or(&k("kl_penalty"), base.kl_penalty)?,
            kl_coeff: kv.f64_or(&k("kl_coeff"), base.kl_coeff)?,
            kl_target: kv.f64_or(&k("kl_target"), base.kl_target)?,
            normalize_advantages: kv.bool_or(&k("normalize_advantages"), base.normalize_advantages)?,
            hidden: kv.usize_list_or(&k("hidden"), &base.hidden)?,
            initial_std: kv.f64_or(&k("initial_std"), base.initial_std)?,
            checkpoint_interval: kv.usize_or(&k("checkpoint_interval"), base.checkpoint_interval)?,
        };
        c.validate(prefix)?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let kv = KvConfig::parse(text)?;
        let c = Self::read_kv(&kv, "", &PpoConfig::default())?;
        kv.finish()?;
        Ok(c)
    }

    pub fn validate(&self, prefix: &str) -> Result<(), ConfigError> {
        let bad = |f: &str, r: &str| Err(ConfigError::invalid(format!("{prefix}{f}"), r));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", "must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda", "must be in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip", "must be > 0");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be >= 1");
        }
        if self.minibatch_size == 0 || self.minibatch_size > self.batch_size {
            return bad("minibatch_size", "must be in [1, batch_size]");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be >= 1");
        }
        if self.workers == 0 {
            return bad("workers", "must be >= 1");
        }
        if !(self.value_clip > 0.0) {
            return bad("value_clip", "must be > 0");
        }
        if !(self.value_coef >= 0.0) {
            return bad("value_coef", "must be >= 0");
        }
        if !(self.entropy_coef >= 0.0) {
            return bad("entropy_coef", "must be >= 0");
        }
        if !(self.kl_coeff >= 0.0) {
            return bad("kl_coeff", "must be >= 0");
        }
        if !(self.kl_target > 0.0) {
            return bad("kl_target", "must be > 0");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden", "need at least one non-empty hidden layer");
        }
        if !(self.initial_std > 0.0) {
            return bad("initial_std", "must be > 0");
        }
        if self.checkpoint_interval == 0 {
            return bad("checkpoint_interval", "must be >= 1");
        }
        Ok(())
    }

    /// Canonical text of the settings that shape the learned policy. The
    /// worker count and checkpoint interval are left out on purpose so that
    /// they can change on resume.
    pub fn write_kv(&self, w: &mut KvWriter, prefix: &str) {
        let k = |name: &str| format!("{prefix}{name}");
        w.f64(&k("gamma"), self.gamma)
            .f64(&k("lambda"), self.lambda)
            .f64(&k("clip"), self.clip)
            .f64(&k("learning_rate"), self.learning_rate)
            .int(&k("batch_size"), self.batch_size)
            .int(&k("minibatch_size"), self.minibatch_size)
            .int(&k("epochs"), self.epochs)
            .f64(&k("value_clip"), self.value_clip)
            .f64(&k("value_coef"), self.value_coef)
            .f64(&k("entropy_coef"), self.entropy_coef)
            .bool(&k("kl_penalty"), self.kl_penalty)
            .f64(&k("kl_coeff"), self.kl_coeff)
            .f64(&k("kl_target"), self.kl_target)
            .bool(&k("normalize_advantages"), self.normalize_advantages)
            .usize_list(&k("hidden"), &self.hidden)
            .f64(&k("initial_std"), self.initial_std);
    }

    pub fn to_kv_string(&self) -> String {
        let mut w = KvWriter::new();
        w.comment("training hyperparameters");
        self.write_kv(&mut w, "");
        w.int("workers", self.workers).int("checkpoint_interval", self.checkpoint_interval);
        w.finish()
    }

    /// Number of update iterations for a step budget.
    pub fn iterations_for(&self, total_steps: u64) -> u64 {
        total_steps.div_ceil(self.batch_size as u64)
    }

    /// Steps each worker collects per iteration.
    pub fn steps_per_worker(&self) -> usize {
        self.batch_size.div_ceil(self.workers)
    }
}
