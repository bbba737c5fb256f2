//! The training loop.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::KvWriter;
use crate::dynamics::model::{build_model, ModelConfig};
use crate::env::observation::observation_dim;
use crate::env::EnvConfig;
use crate::fsutil::{config_hash, write_atomic};
use crate::neural::{ActorCritic, Adam, Checkpoint};

use super::batch::TrajectoryBatch;
use super::config::PpoConfig;
use super::gae::{compute_advantages, normalize_advantages};
use super::metrics::{IterationStats, MetricsLog};
use super::objective::{mean_kl, ppo_loss, LossStats, LossWeights, Minibatch};
use super::rollout::collect_rollouts;
use super::PpoError;

const TRAINER_STREAM: u64 = u64::MAX;

/// Everything a training run depends on besides its output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSetup {
    pub model_config: ModelConfig,
    pub env_config: EnvConfig,
    pub ppo: PpoConfig,
    pub seed: u64,
}

/// Hash of the settings a policy is tied to: the robot model, the action
/// and observation interface, the reward and the discount. Exploration and
/// evaluation settings (pushes, randomization, initial noise, episode
/// length) are not part of it.
pub fn interface_hash(model: &ModelConfig, env: &EnvConfig, ppo: &PpoConfig) -> String {
    let mut w = KvWriter::new();
    w.f64("control_dt", env.control_dt).f64("max_joint_speed", env.max_joint_speed);
    env.reward.write_kv(&mut w, "reward.");
    env.observation.write_kv(&mut w, "observation.");
    w.f64("gamma", ppo.gamma).usize_list("hidden", &ppo.hidden);
    config_hash(&[&model.to_kv_string(), &w.finish()])
}

pub fn checkpoint_path(out_dir: &Path, iteration: u64) -> PathBuf {
    out_dir.join("checkpoints").join(format!("ckpt_{iteration:06}.bin"))
}

/// Checkpoint with the highest iteration number in `out_dir`.
pub fn latest_checkpoint(out_dir: &Path) -> Option<PathBuf> {
    let entries = std::fs::read_dir(out_dir.join("checkpoints")).ok()?;
    entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let it = name.strip_prefix("ckpt_")?.strip_suffix(".bin")?.parse::<u64>().ok()?;
            Some((it, e.path()))
        })
        .max_by_key(|(it, _)| *it)
        .map(|(_, p)| p)
}

#[derive(Debug, Clone)]
pub struct Trainer {
    pub setup: TrainSetup,
    pub net: ActorCritic,
    pub adam: Adam,
    pub kl_coeff: f64,
    pub iteration: u64,
    pub global_step: u64,
    pub value_scale: f64,
    pub config_hash: String,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(setup: TrainSetup) -> Result<Self, PpoError> {
        setup.env_config.validate()?;
        setup.ppo.validate("")?;
        let model = build_model(&setup.model_config).map_err(crate::env::EnvError::from)?;
        let n = model.n_joints();
        let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
        rng.set_stream(TRAINER_STREAM);
        let net = ActorCritic::new(observation_dim(n), n, &setup.ppo.hidden, setup.ppo.initial_std, &mut rng);
        let adam = Adam::new(net.n_params(), setup.ppo.learning_rate);
        let value_scale = setup.env_config.reward.max_reward() / (1.0 - setup.ppo.gamma).max(1e-3);
        Ok(Trainer {
            config_hash: interface_hash(&setup.model_config, &setup.env_config, &setup.ppo),
            kl_coeff: setup.ppo.kl_coeff,
            net,
            adam,
            iteration: 0,
            global_step: 0,
            value_scale,
            setup,
            rng,
        })
    }

    /// Continues from a checkpoint. `setup` may differ from the original run
    /// in exploration settings, worker count and step budget.
    pub fn from_checkpoint(setup: TrainSetup, ckpt: Checkpoint, force: bool) -> Result<Self, PpoError> {
        let mut t = Self::new(setup)?;
        ckpt.check_hash(&t.config_hash, force)?;
        if ckpt.net.n_params() != t.net.n_params() {
            return Err(crate::neural::CheckpointError::Corrupt("network shape differs from the configuration".into()).into());
        }
        t.rng = ChaCha8Rng::seed_from_u64(ckpt.seed);
        t.rng.set_stream(TRAINER_STREAM);
        t.rng.set_word_pos(ckpt.rng_word_pos);
        t.setup.seed = ckpt.seed;
        t.net = ckpt.net;
        t.adam = ckpt.adam;
        t.adam.lr = t.setup.ppo.learning_rate;
        t.kl_coeff = ckpt.kl_coeff;
        t.iteration = ckpt.iteration;
        t.global_step = ckpt.global_step;
        t.value_scale = ckpt.value_scale;
        Ok(t)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config_hash: self.config_hash.clone(),
            global_step: self.global_step,
            iteration: self.iteration,
            seed: self.setup.seed,
            rng_word_pos: self.rng.get_word_pos(),
            kl_coeff: self.kl_coeff,
            value_scale: self.value_scale,
            net: self.net.clone(),
            adam: self.adam.clone(),
        }
    }

    fn weights(&self) -> LossWeights {
        let p = &self.setup.ppo;
        LossWeights {
            clip: p.clip,
            value_clip: p.value_clip / self.value_scale,
            value_coef: p.value_coef,
            entropy_coef: p.entropy_coef,
            kl_coeff: if p.kl_penalty { self.kl_coeff } else { 0.0 },
        }
    }

    pub fn collect(&self) -> Result<TrajectoryBatch, PpoError> {
        let s = &self.setup;
        collect_rollouts(
            &self.net,
            self.value_scale,
            &s.model_config,
            &s.env_config,
            s.ppo.workers,
            s.ppo.batch_size,
            s.seed,
            self.iteration,
        )
    }

    /// Collects one batch and runs the epoch loop on it. On error the
    /// trainer is left unchanged.
    pub fn iterate(&mut self) -> Result<IterationStats, PpoError> {
        let start = Instant::now();
        let batch = self.collect()?;
        let mut next = self.clone();
        let stats = next.update(&batch, start)?;
        *self = next;
        Ok(stats)
    }

    fn update(&mut self, batch: &TrajectoryBatch, start: Instant) -> Result<IterationStats, PpoError> {
        let p = self.setup.ppo.clone();
        let (mut adv, returns) = compute_advantages(&batch.rewards, &batch.values, &batch.ends, p.gamma, p.lambda)?;
        if p.normalize_advantages {
            normalize_advantages(&mut adv);
        }
        let scaled_returns: Vec<f64> = returns.iter().map(|r| r / self.value_scale).collect();
        let scaled_values: Vec<f64> = batch.values.iter().map(|v| v / self.value_scale).collect();
        let old_log_std: Array1<f64> = self.net.policy.log_std.clone();
        let obs = batch.observations_view();
        let actions = batch.actions_view();
        let means = batch.means_view();
        let weights = self.weights();

        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut params = self.net.flat_params();
        let mut sum = LossStats::default();
        let mut updates = 0usize;
        for _ in 0..p.epochs {
            order.shuffle(&mut self.rng);
            for idx in order.chunks(p.minibatch_size) {
                let mb = Minibatch {
                    observations: Array2::from_shape_fn((idx.len(), batch.obs_dim), |(i, j)| obs[[idx[i], j]]),
                    actions: Array2::from_shape_fn((idx.len(), batch.act_dim), |(i, j)| actions[[idx[i], j]]),
                    old_means: Array2::from_shape_fn((idx.len(), batch.act_dim), |(i, j)| means[[idx[i], j]]),
                    old_log_probs: idx.iter().map(|&i| batch.log_probs[i]).collect(),
                    advantages: idx.iter().map(|&i| adv[i]).collect(),
                    returns: idx.iter().map(|&i| scaled_returns[i]).collect(),
                    old_values: idx.iter().map(|&i| scaled_values[i]).collect(),
                };
                let (s, grads) = ppo_loss(&self.net, &mb, old_log_std.view(), &weights)?;
                self.adam.update(&mut params, &grads);
                self.net.set_flat_params(&params);
                sum.total += s.total;
                sum.policy += s.policy;
                sum.value += s.value;
                sum.clip_fraction += s.clip_fraction;
                sum.entropy += s.entropy;
                updates += 1;
            }
        }
        if !self.net.is_finite() {
            return Err(PpoError::NonFinite("parameters after update".into()));
        }
        let kl = mean_kl(&self.net, obs, means, old_log_std.view())?;
        if p.kl_penalty {
            if kl > 2.0 * p.kl_target {
                self.kl_coeff *= 2.0;
            } else if kl < 0.5 * p.kl_target {
                self.kl_coeff *= 0.5;
            }
        }
        self.iteration += 1;
        self.global_step += batch.len() as u64;

        let n = updates.max(1) as f64;
        let dt = self.setup.env_config.control_dt;
        Ok(IterationStats {
            iteration: self.iteration,
            global_step: self.global_step,
            batch_steps: batch.len(),
            mean_reward: batch.mean_reward(),
            mean_episode_return: batch.mean_episode_return(),
            mean_episode_s: batch.mean_episode_steps() * dt,
            episodes: batch.episodes.len(),
            failures: batch.episodes.iter().filter(|e| e.failure).count(),
            term_means: batch.term_sums.iter().map(|s| s / batch.len().max(1) as f64).collect(),
            kl,
            clip_fraction: sum.clip_fraction / n,
            policy_loss: sum.policy / n,
            value_loss: sum.value / n,
            entropy: sum.entropy / n,
            kl_coeff: self.kl_coeff,
            action_std: self.net.policy.log_std.iter().map(|l| l.exp()).sum::<f64>() / self.net.policy.log_std.len() as f64,
            divergences: batch.divergences,
            wall_s: start.elapsed().as_secs_f64(),
        })
    }
}

/// Runs `trainer` until the global step budget `total_steps` is used up,
/// writing checkpoints, `metrics.csv` and `events.log` under `out_dir`. A
/// checkpoint for the starting iteration is written first when missing.
pub fn train(trainer: &mut Trainer, total_steps: u64, out_dir: &Path, mut progress: impl FnMut(&IterationStats)) -> Result<Vec<IterationStats>, PpoError> {
    let io = |path: &Path, e: std::io::Error| PpoError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let metrics_path = out_dir.join("metrics.csv");
    let events_path = out_dir.join("events.log");
    let mut metrics = MetricsLog::resume(&metrics_path, &trainer.config_hash, trainer.setup.seed, trainer.iteration);
    let mut events = std::fs::read_to_string(&events_path).unwrap_or_default();
    let log_event = |events: &mut String, line: String| -> Result<(), PpoError> {
        log::info!("{line}");
        events.push_str(&line);
        events.push('\n');
        write_atomic(&events_path, events.as_bytes()).map_err(|e| io(&events_path, e))
    };

    let first = checkpoint_path(out_dir, trainer.iteration);
    if !first.exists() {
        trainer.checkpoint().save(&first)?;
        log_event(&mut events, format!("checkpoint iteration {} step {}", trainer.iteration, trainer.global_step))?;
    }
    let target = trainer.setup.ppo.iterations_for(total_steps);
    let mut all = Vec::new();
    while trainer.iteration < target {
        let stats = match trainer.iterate() {
            Ok(s) => s,
            Err(e) => {
                log_event(&mut events, format!("aborted at iteration {}: {e}", trainer.iteration + 1))?;
                return Err(e);
            }
        };
        metrics.push(&stats);
        metrics.write(&metrics_path)?;
        progress(&stats);
        let due = trainer.iteration.is_multiple_of(trainer.setup.ppo.checkpoint_interval as u64) || trainer.iteration == target;
        if due {
            trainer.checkpoint().save(&checkpoint_path(out_dir, trainer.iteration))?;
            log_event(&mut events, format!("checkpoint iteration {} step {}", trainer.iteration, trainer.global_step))?;
        }
        all.push(stats);
    }
    if metrics.is_empty() {
        metrics.write(&metrics_path)?;
    }
    Ok(all)
}
