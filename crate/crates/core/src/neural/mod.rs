//! Feed-forward networks, Gaussian policy head and optimizer.

pub mod adam;
pub mod checkpoint;
pub mod gaussian;
pub mod gradcheck;
pub mod mlp;

use rand::Rng;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CheckpointError};
pub use gaussian::{gaussian_kl, gaussian_logprob, GaussianPolicy};
pub use mlp::{Activation, Cache, Layer, Mlp, MlpGrads, NeuralError};

/// Policy and value networks sharing one optimizer. Flat parameter order is
/// policy mean network, log-std, value network.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub policy: GaussianPolicy,
    pub value: Mlp,
}

impl ActorCritic {
    /// `hidden` lists the hidden layer widths of both networks.
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, hidden: &[usize], initial_std: f64, rng: &mut R) -> Self {
        let mut ps = vec![obs_dim];
        ps.extend_from_slice(hidden);
        let mut vs = ps.clone();
        ps.push(act_dim);
        vs.push(1);
        let policy = GaussianPolicy::new(&ps, initial_std, rng);
        let value = Mlp::new(&vs, 1.0, rng);
        ActorCritic { policy, value }
    }

    pub fn n_params(&self) -> usize {
        self.policy.n_params() + self.value.n_params()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.policy.write_params(&mut out);
        self.value.write_params(&mut out);
        out
    }

    pub fn set_flat_params(&mut self, src: &[f64]) {
        let k = self.policy.read_params(src);
        let used = self.value.read_params(&src[k..]);
        debug_assert_eq!(k + used, src.len());
    }

    pub fn is_finite(&self) -> bool {
        self.policy.is_finite() && self.value.is_finite()
    }
}
