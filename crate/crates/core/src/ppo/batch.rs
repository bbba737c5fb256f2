use ndarray::ArrayView2;

use crate::env::reward::TERM_NAMES;

/// How a step relates to the next row of the batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentEnd {
    /// The next row continues the same episode.
    Continue,
    /// The episode failed here; nothing follows.
    Failure,
    /// The segment stops here without failing (time limit or batch
    /// boundary); the carried value is `V` of the next state in return units.
    Bootstrap(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub total_reward: f64,
    pub failure: bool,
}

/// On-policy transitions, row-major, in collection order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub observations: Vec<f64>,
    /// Unclamped samples of the behavior policy.
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Behavior policy means, kept for the KL term.
    pub means: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Value estimates in return units.
    pub values: Vec<f64>,
    pub ends: Vec<SegmentEnd>,
    /// Episodes that finished inside the batch.
    pub episodes: Vec<EpisodeSummary>,
    /// Lengths of episodes cut by the batch boundary.
    pub partial: Vec<usize>,
    /// Per reward term, summed contribution over all rows.
    pub term_sums: Vec<f64>,
    /// Steps lost to numerical divergence.
    pub divergences: usize,
}

impl TrajectoryBatch {
    pub fn new(obs_dim: usize, act_dim: usize) -> Self {
        TrajectoryBatch {
            obs_dim,
            act_dim,
            observations: Vec::new(),
            actions: Vec::new(),
            log_probs: Vec::new(),
            means: Vec::new(),
            rewards: Vec::new(),
            values: Vec::new(),
            ends: Vec::new(),
            episodes: Vec::new(),
            partial: Vec::new(),
            term_sums: vec![0.0; TERM_NAMES.len()],
            divergences: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64], log_prob: f64, mean: &[f64], reward: f64, value: f64) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        debug_assert_eq!(action.len(), self.act_dim);
        self.observations.extend_from_slice(obs);
        self.actions.extend_from_slice(action);
        self.means.extend_from_slice(mean);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.ends.push(SegmentEnd::Continue);
    }

    /// Appends `other` after the rows of `self`.
    pub fn append(&mut self, other: TrajectoryBatch) {
        assert_eq!((self.obs_dim, self.act_dim), (other.obs_dim, other.act_dim));
        self.observations.extend(other.observations);
        self.actions.extend(other.actions);
        self.log_probs.extend(other.log_probs);
        self.means.extend(other.means);
        self.rewards.extend(other.rewards);
        self.values.extend(other.values);
        self.ends.extend(other.ends);
        self.episodes.extend(other.episodes);
        self.partial.extend(other.partial);
        for (a, b) in self.term_sums.iter_mut().zip(other.term_sums) {
            *a += b;
        }
        self.divergences += other.divergences;
    }

    pub fn observations_view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.len(), self.obs_dim), &self.observations).expect("rows × obs_dim")
    }

    pub fn actions_view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.len(), self.act_dim), &self.actions).expect("rows × act_dim")
    }

    pub fn means_view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.len(), self.act_dim), &self.means).expect("rows × act_dim")
    }

    /// Number of segment ends (failures, time limits and batch cuts).
    pub fn boundaries(&self) -> usize {
        self.ends.iter().filter(|e| !matches!(e, SegmentEnd::Continue)).count()
    }

    pub fn mean_reward(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.rewards.iter().sum::<f64>() / self.len() as f64
        }
    }

    /// Mean length in steps of finished episodes, or of the cut segments
    /// when none finished.
    pub fn mean_episode_steps(&self) -> f64 {
        if !self.episodes.is_empty() {
            self.episodes.iter().map(|e| e.steps as f64).sum::<f64>() / self.episodes.len() as f64
        } else if !self.partial.is_empty() {
            self.partial.iter().sum::<usize>() as f64 / self.partial.len() as f64
        } else {
            0.0
        }
    }

    pub fn mean_episode_return(&self) -> f64 {
        if self.episodes.is_empty() {
            0.0
        } else {
            self.episodes.iter().map(|e| e.total_reward).sum::<f64>() / self.episodes.len() as f64
        }
    }
}
