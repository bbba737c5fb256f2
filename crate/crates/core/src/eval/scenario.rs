//! Single evaluation episodes.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::centroidal::centroidal;
use crate::env::trace::{StepRecord, Trace, TraceHeader};
use crate::env::{Env, EnvError, ForceEvent};
use crate::neural::GaussianPolicy;

/// Maps an observation to a normalized action.
pub trait Policy: Sync {
    fn act(&self, obs: &[f64]) -> Vec<f64>;
}

/// Deterministic evaluation: the mean of the Gaussian.
impl Policy for GaussianPolicy {
    fn act(&self, obs: &[f64]) -> Vec<f64> {
        self.mean_action(obs).expect("observation width matches the policy")
    }
}

/// Commands zero joint velocity, so the PID controllers hold the initial
/// posture.
#[derive(Debug, Clone, Copy)]
pub struct HoldPolicy {
    pub joints: usize,
}

impl Policy for HoldPolicy {
    fn act(&self, _obs: &[f64]) -> Vec<f64> {
        vec![0.0; self.joints]
    }
}

/// Episode seed for a keyed evaluation episode. Depends only on the key, so
/// results do not depend on which worker runs the episode.
pub fn episode_seed(base: u64, cell: u64, repetition: u64, attempt: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base.wrapping_add(cell));
    rng.set_stream(repetition.wrapping_mul(64).wrapping_add(attempt));
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub episode_seed: u64,
    pub survived: bool,
    pub survival_time: f64,
    /// Completed force applications survived.
    pub endured: usize,
    /// Force applications that started during the episode.
    pub applications: usize,
    /// Start attempts used to satisfy the standing precondition.
    pub attempts: usize,
    pub diverged: bool,
    pub trace: Option<Trace>,
}

/// What happens in one episode. The environment's own schedule supplies
/// random pushes when its perturbation config is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scripted: Vec<ForceEvent>,
    /// Precondition check time and speed bound: the CoM speed at `t` must be
    /// below the bound, otherwise the start is resampled.
    pub settle: Option<(f64, f64)>,
    pub max_attempts: usize,
    pub record_trace: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            scripted: Vec::new(),
            settle: None,
            max_attempts: 1,
            record_trace: false,
        }
    }
}

/// Runs until failure or the env's duration cap. Success means no non-foot
/// link touched the ground before the cap; divergence counts as failure.
/// `seed_for(attempt)` supplies the episode seed of each start attempt.
pub fn run_scenario(env: &mut Env, policy: &dyn Policy, scenario: &Scenario, seed_for: impl Fn(u64) -> u64) -> Result<EpisodeResult, EnvError> {
    env.set_scripted(scenario.scripted.clone());
    let dt = env.config().control_dt;
    let settle_steps = scenario.settle.map(|(t, _)| (t / dt).round() as usize);
    let attempts = scenario.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        let seed = seed_for(attempt as u64);
        attempt += 1;
        let mut obs = env.reset_with_seed(seed);
        let mut trace = scenario.record_trace.then(|| Trace {
            header: TraceHeader::for_env(env),
            steps: Vec::new(),
        });
        let mut failure = false;
        let mut diverged = false;
        let mut fail_tick = None;
        let mut restart = false;
        loop {
            if Some(env.steps()) == settle_steps && attempt < attempts {
                let s = env.state();
                let speed = centroidal(env.model(), &s.q, &s.v).com_velocity.norm();
                if speed >= scenario.settle.map(|(_, v)| v).unwrap_or(f64::INFINITY) {
                    restart = true;
                    break;
                }
            }
            let action = policy.act(&obs);
            match env.step(&action) {
                Ok(out) => {
                    if let Some(t) = trace.as_mut() {
                        t.steps.push(StepRecord::new(env, &action, &out));
                    }
                    if out.done {
                        failure = out.failure;
                        if failure {
                            fail_tick = Some(env.state().tick);
                        }
                        break;
                    }
                    obs = out.observation;
                }
                Err(EnvError::Dynamics(_)) => {
                    failure = true;
                    diverged = true;
                    fail_tick = Some(env.state().tick);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if restart {
            continue;
        }
        let end_tick = env.state().tick;
        let pushes: Vec<ForceEvent> = env.pushes().iter().chain(env.scripted()).copied().filter(|e| e.magnitude >= 0.0).collect();
        let applications = pushes.iter().filter(|e| e.start_tick < end_tick).count();
        let completed = pushes.iter().filter(|e| e.end_tick() <= end_tick).count();
        // The application that preceded a fall was not endured.
        let endured = match fail_tick {
            Some(_) => applications.saturating_sub(1),
            None => completed,
        };
        return Ok(EpisodeResult {
            episode_seed: seed,
            survived: !failure,
            survival_time: env.time(),
            endured,
            applications,
            attempts: attempt,
            diverged,
            trace,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::ModelConfig;
    use crate::env::{EnvConfig, InitConfig, RandomizationConfig};

    fn eval_env(duration: f64) -> Env {
        let mut c = EnvConfig::default();
        c.perturbation.enabled = false;
        c.randomization = RandomizationConfig::disabled();
        c.init = InitConfig {
            sigma_position: 2f64.to_radians(),
            sigma_velocity: 0.0,
        };
        c.max_duration = duration;
        Env::new(ModelConfig::default(), c, 0).unwrap()
    }

    #[test]
    fn holding_survives_without_push() {
        let mut env = eval_env(7.0);
        let hold = HoldPolicy { joints: 8 };
        let r = run_scenario(&mut env, &hold, &Scenario::default(), |a| episode_seed(1, 0, 0, a)).unwrap();
        assert!(r.survived);
        assert!((r.survival_time - 7.0).abs() < 1e-9);
    }

    #[test]
    fn overwhelming_push_fails() {
        let mut env = eval_env(7.0);
        let s = Scenario {
            scripted: vec![ForceEvent::new(3.0, 0.2, 0.0, 3000.0, 0)],
            ..Scenario::default()
        };
        let r = run_scenario(&mut env, &HoldPolicy { joints: 8 }, &s, |a| episode_seed(1, 0, 0, a)).unwrap();
        assert!(!r.survived);
        assert!(r.survival_time < 7.0);
        assert_eq!(r.endured, 0);
    }

    #[test]
    fn scripted_force_window_in_trace() {
        let mut env = eval_env(4.0);
        let s = Scenario {
            scripted: vec![ForceEvent::new(3.0, 0.2, std::f64::consts::PI, 30.0, 0)],
            record_trace: true,
            ..Scenario::default()
        };
        let r = run_scenario(&mut env, &HoldPolicy { joints: 8 }, &s, |a| episode_seed(2, 0, 0, a)).unwrap();
        let trace = r.trace.unwrap();
        let started: Vec<&StepRecord> = trace.steps.iter().filter(|st| !st.events.is_empty()).collect();
        assert_eq!(started.len(), 1);
        let e = ForceEvent::from(started[0].events[0]);
        assert!((e.start() - 3.0).abs() < 1e-12);
        assert!((e.start() + e.duration() - 3.2).abs() < 1e-12);
        // Recorded in the step whose interval contains 3.0 s.
        assert!(started[0].t > 3.0 && started[0].t - 0.04 <= 3.0 + 1e-9);
    }
}
