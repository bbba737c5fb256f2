//! Parallel on-policy collection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::model::ModelConfig;
use crate::env::{Env, EnvConfig, EnvError};
use crate::neural::ActorCritic;

use super::batch::{EpisodeSummary, SegmentEnd, TrajectoryBatch};
use super::PpoError;

/// Random stream of `worker` in `iteration`. Stream `2 i` seeds episodes,
/// stream `2 i + 1` samples actions.
pub fn worker_rng(base_seed: u64, worker: usize, iteration: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(worker as u64));
    rng.set_stream(2 * iteration + purpose);
    rng
}

/// Runs one worker for `steps` transitions. Every call starts a fresh
/// episode; the last segment is bootstrapped with `V`.
pub fn collect_worker(net: &ActorCritic, value_scale: f64, env: &mut Env, action_rng: &mut ChaCha8Rng, steps: usize) -> Result<TrajectoryBatch, PpoError> {
    let mut batch = TrajectoryBatch::new(env.observation_dim(), env.action_dim());
    let value_of = |obs: &[f64]| -> Result<f64, PpoError> { Ok(net.value.predict_one(obs)?[0] * value_scale) };
    let mut obs = env.reset();
    let mut ep_steps = 0usize;
    let mut ep_reward = 0.0;
    while batch.len() < steps {
        let mean = net.policy.mean_action(&obs)?;
        let (action, log_prob) = net.policy.sample(&obs, action_rng)?;
        let value = value_of(&obs)?;
        let out = match env.step(&action) {
            Ok(out) => out,
            Err(EnvError::Dynamics(e)) => {
                log::warn!("episode {} diverged: {e}", env.episode_seed());
                batch.divergences += 1;
                if ep_steps > 0 {
                    *batch.ends.last_mut().expect("segment has steps") = SegmentEnd::Failure;
                    batch.episodes.push(EpisodeSummary {
                        steps: ep_steps,
                        total_reward: ep_reward,
                        failure: true,
                    });
                }
                obs = env.reset();
                ep_steps = 0;
                ep_reward = 0.0;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        batch.push(&obs, &action, log_prob, &mean, out.reward, value);
        for (sum, term) in batch.term_sums.iter_mut().zip(&out.breakdown.terms) {
            *sum += term.contribution;
        }
        ep_steps += 1;
        ep_reward += out.reward;
        if out.done {
            let end = if out.failure {
                SegmentEnd::Failure
            } else {
                SegmentEnd::Bootstrap(value_of(&out.observation)?)
            };
            *batch.ends.last_mut().expect("just pushed") = end;
            batch.episodes.push(EpisodeSummary {
                steps: ep_steps,
                total_reward: ep_reward,
                failure: out.failure,
            });
            obs = env.reset();
            ep_steps = 0;
            ep_reward = 0.0;
        } else {
            obs = out.observation;
        }
    }
    if ep_steps > 0 {
        *batch.ends.last_mut().expect("segment has steps") = SegmentEnd::Bootstrap(value_of(&obs)?);
        batch.partial.push(ep_steps);
    }
    Ok(batch)
}

/// Collects at least `target` transitions on `workers` threads with one
/// shared policy snapshot. Sub-batches are concatenated in worker order, so
/// the result does not depend on thread scheduling.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollouts(
    net: &ActorCritic,
    value_scale: f64,
    model_config: &ModelConfig,
    env_config: &EnvConfig,
    workers: usize,
    target: usize,
    base_seed: u64,
    iteration: u64,
) -> Result<TrajectoryBatch, PpoError> {
    let per_worker = target.div_ceil(workers);
    let run = |w: usize| -> Result<TrajectoryBatch, PpoError> {
        let mut env = Env::with_rng(model_config.clone(), env_config.clone(), worker_rng(base_seed, w, iteration, 0))?;
        let mut action_rng = worker_rng(base_seed, w, iteration, 1);
        collect_worker(net, value_scale, &mut env, &mut action_rng, per_worker)
    };
    let results: Vec<Result<TrajectoryBatch, PpoError>> = if workers == 1 {
        vec![run(0)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers).map(|w| s.spawn(move || run(w))).collect();
            handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect()
        })
    };
    let mut iter = results.into_iter();
    let mut batch = iter.next().expect("at least one worker")?;
    for r in iter {
        batch.append(r?);
    }
    Ok(batch)
}
