//! The push-recovery MDP: 25 Hz joint velocity actions integrated into PID
//! references, normalized observations, kernel-shaped reward, random
//! initial states, random pushes and per-episode domain randomization.

pub mod action;
pub mod config;
pub mod init;
pub mod kernel;
pub mod observation;
pub mod perturbation;
pub mod randomization;
pub mod reward;
pub mod trace;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ConfigError;
use crate::dynamics::contact::contact_forces;
use crate::dynamics::integrator::{step as physics_step, DynamicsError, ExternalForce};
use crate::dynamics::model::{build_model, ModelConfig, ModelError, RobotModel};
use crate::dynamics::state::SimState;

pub use action::integrate_action;
pub use config::EnvConfig;
pub use init::{sample_initial_state, InitConfig};
pub use kernel::rbf_kernel;
pub use observation::{normalize, observation_dim, observe, ObservationRanges};
pub use perturbation::{schedule_perturbation, ForceEvent, PerturbationConfig};
pub use randomization::{randomize_domain, RandomizationConfig};
pub use reward::{compute_reward, RewardBreakdown, RewardSpec};

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("action has {got} entries, expected {expected}")]
    ActionDimension { expected: usize, got: usize },
    #[error("step called on a finished episode; call reset first")]
    EpisodeOver,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// A non-foot link touched the ground.
    pub failure: bool,
    /// The episode hit its duration cap.
    pub truncated: bool,
    pub breakdown: RewardBreakdown,
    /// Pushes that started during this step.
    pub started: Vec<ForceEvent>,
}

/// One environment instance. Owns its random stream; every episode draws a
/// fresh seed from it, and everything random inside the episode derives from
/// that seed alone, so a single `u64` replays an episode.
#[derive(Debug, Clone)]
pub struct Env {
    model_config: ModelConfig,
    config: EnvConfig,
    nominal: RobotModel,
    nominal_weight: f64,
    perturb_link: usize,
    rng: ChaCha8Rng,
    episode_seed: u64,
    episode_rng: ChaCha8Rng,
    model: RobotModel,
    state: SimState,
    commanded: Vec<f64>,
    steps: usize,
    finished: bool,
    scripted: Vec<ForceEvent>,
    pushes: Vec<ForceEvent>,
    torque_buffer: Vec<f64>,
}

/// Resolves a link name; `base` is the floating base.
pub fn resolve_link(model: &RobotModel, name: &str) -> Result<usize, EnvError> {
    if name == "base" {
        return Ok(0);
    }
    model.link_index(name).ok_or_else(|| EnvError::UnknownLink(name.to_string()))
}

impl Env {
    pub fn new(model_config: ModelConfig, config: EnvConfig, seed: u64) -> Result<Self, EnvError> {
        Self::with_rng(model_config, config, ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uses an explicit random stream for episode seeds.
    pub fn with_rng(model_config: ModelConfig, config: EnvConfig, rng: ChaCha8Rng) -> Result<Self, EnvError> {
        config.validate()?;
        let nominal = build_model(&model_config)?;
        let perturb_link = resolve_link(&nominal, &config.perturbation.link)?;
        let state = SimState::new(&nominal, [0.0; 3], &nominal.home);
        let mut env = Env {
            nominal_weight: nominal.weight(),
            commanded: nominal.home.clone(),
            model: nominal.clone(),
            nominal,
            model_config,
            config,
            perturb_link,
            rng,
            episode_seed: 0,
            episode_rng: ChaCha8Rng::seed_from_u64(0),
            state,
            steps: 0,
            finished: true,
            scripted: Vec::new(),
            pushes: Vec::new(),
            torque_buffer: Vec::new(),
        };
        env.reset_with_seed(0);
        env.finished = true;
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn model_config(&self) -> &ModelConfig {
        &self.model_config
    }

    pub fn nominal(&self) -> &RobotModel {
        &self.nominal
    }

    /// The model of the current episode, after randomization.
    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn episode_seed(&self) -> u64 {
        self.episode_seed
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.state.time()
    }

    pub fn observation_dim(&self) -> usize {
        observation_dim(self.nominal.n_joints())
    }

    pub fn action_dim(&self) -> usize {
        self.nominal.n_joints()
    }

    /// Pushes applied in every following episode in addition to random ones.
    pub fn set_scripted(&mut self, events: Vec<ForceEvent>) {
        self.scripted = events;
    }

    pub fn scripted(&self) -> &[ForceEvent] {
        &self.scripted
    }

    /// Random pushes of the current episode so far.
    pub fn pushes(&self) -> &[ForceEvent] {
        &self.pushes
    }

    pub fn perturb_link(&self) -> usize {
        self.perturb_link
    }

    pub fn reset(&mut self) -> Vec<f64> {
        let seed = self.rng.next_u64();
        self.reset_with_seed(seed)
    }

    pub fn reset_with_seed(&mut self, episode_seed: u64) -> Vec<f64> {
        self.episode_seed = episode_seed;
        self.episode_rng = ChaCha8Rng::seed_from_u64(episode_seed);
        self.model = randomize_domain(&self.nominal, &mut self.episode_rng, &self.config.randomization);
        self.state = sample_initial_state(&self.model, &mut self.episode_rng, &self.config.init);
        self.state.contacts = contact_forces(&self.model, &self.state);
        self.commanded = self.state.active_ref.clone();
        self.steps = 0;
        self.finished = false;
        self.pushes.clear();
        self.observe()
    }

    pub fn observe(&self) -> Vec<f64> {
        observe(&self.model, &self.state, &self.config.observation, self.nominal_weight)
    }

    /// Advances one control period. `action` holds joint velocity commands
    /// in units of `max_joint_speed`, clamped to `[-1, 1]`.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome, EnvError> {
        if self.finished {
            return Err(EnvError::EpisodeOver);
        }
        let n = self.nominal.n_joints();
        if action.len() != n {
            return Err(EnvError::ActionDimension {
                expected: n,
                got: action.len(),
            });
        }
        let speed = self.config.max_joint_speed;
        let command: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0) * speed).collect();
        let dt = self.config.control_dt;
        self.commanded = integrate_action(&command, &self.commanded, dt, speed, &self.model);
        self.state.enqueue_reference(self.commanded.clone(), self.model.actuation_delay);

        let mut started = Vec::new();
        if let Some(e) = schedule_perturbation(&mut self.episode_rng, dt, &self.config.perturbation, self.state.tick, self.perturb_link) {
            self.pushes.push(e);
            started.push(e);
        }
        let substeps = self.config.substeps();
        let first_tick = self.state.tick;
        started.extend(
            self.scripted
                .iter()
                .filter(|e| e.start_tick >= first_tick && e.start_tick < first_tick + substeps as u64)
                .copied(),
        );

        self.torque_buffer.clear();
        let mut forces: Vec<ExternalForce> = Vec::new();
        for _ in 0..substeps {
            let tick = self.state.tick;
            forces.clear();
            forces.extend(
                self.pushes
                    .iter()
                    .chain(&self.scripted)
                    .filter(|e| e.is_active(tick) && e.magnitude != 0.0)
                    .map(|e| e.external()),
            );
            if let Err(e) = physics_step(&self.model, &mut self.state, &forces) {
                self.finished = true;
                return Err(e.into());
            }
            self.torque_buffer.extend_from_slice(&self.state.torques);
        }

        let breakdown = compute_reward(&self.model, &self.state, &command, &self.torque_buffer, &self.config.reward);
        if !breakdown.total.is_finite() {
            self.finished = true;
            return Err(DynamicsError::Diverged { time: self.state.time() }.into());
        }
        self.steps += 1;
        let failure = breakdown.terminal;
        let truncated = !failure && self.steps >= self.config.max_steps();
        let done = failure || truncated;
        self.finished = done;
        Ok(StepOutcome {
            observation: self.observe(),
            reward: breakdown.total,
            done,
            failure,
            truncated,
            breakdown,
            started,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }
}
