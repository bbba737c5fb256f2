//! Proximal policy optimization with parallel synchronous rollouts.

pub mod batch;
pub mod config;
pub mod gae;
pub mod metrics;
pub mod objective;
pub mod rollout;
pub mod trainer;

use std::path::PathBuf;

pub use batch::{EpisodeSummary, SegmentEnd, TrajectoryBatch};
pub use config::PpoConfig;
pub use gae::{compute_advantages, normalize_advantages};
pub use metrics::{IterationStats, MetricsLog};
pub use objective::{clipped_surrogate, ppo_loss, LossStats, LossWeights, Minibatch};
pub use rollout::{collect_rollouts, worker_rng};
pub use trainer::{checkpoint_path, interface_hash, latest_checkpoint, train, TrainSetup, Trainer};

use crate::config::ConfigError;
use crate::env::EnvError;
use crate::neural::{CheckpointError, NeuralError};

#[derive(Debug, thiserror::Error)]
pub enum PpoError {
    #[error("segment ending at row {index} has no bootstrap value")]
    MissingBootstrap { index: usize },
    #[error("non-finite update: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}
