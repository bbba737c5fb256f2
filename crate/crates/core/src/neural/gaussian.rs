//! Diagonal Gaussian policy head.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{Mlp, NeuralError};

/// `Σ_i [-log σ_i - ½ log 2π - ½ ((a_i - μ_i)/σ_i)²]`.
pub fn gaussian_logprob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    assert!(mean.len() == log_std.len() && mean.len() == action.len());
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a - m) / ls.exp();
            -ls - half_log_2pi - 0.5 * z * z
        })
        .sum()
}

/// `KL(N(μ₀, σ₀) ‖ N(μ₁, σ₁))` for diagonal Gaussians.
pub fn gaussian_kl(mean0: &[f64], log_std0: &[f64], mean1: &[f64], log_std1: &[f64]) -> f64 {
    (0..mean0.len())
        .map(|i| {
            let var0 = (2.0 * log_std0[i]).exp();
            let var1 = (2.0 * log_std1[i]).exp();
            let d = mean0[i] - mean1[i];
            log_std1[i] - log_std0[i] + (var0 + d * d) / (2.0 * var1) - 0.5
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    pub log_std: Array1<f64>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], initial_std: f64, rng: &mut R) -> Self {
        let mean = Mlp::new(sizes, 0.01, rng);
        let log_std = Array1::from_elem(mean.output_dim(), initial_std.ln());
        GaussianPolicy { mean, log_std }
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.mean.predict_one(obs)
    }

    /// Samples an action and returns it with its log-probability.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64), NeuralError> {
        let mean = self.mean.predict_one(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(self.log_std.iter())
            .map(|(&m, &ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = gaussian_logprob(&mean, self.log_std.as_slice().expect("contiguous"), &action);
        Ok((action, lp))
    }

    /// Log-probabilities of a batch of actions with the means that produced
    /// them.
    pub fn log_probs(&self, obs: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>), NeuralError> {
        let mean = self.mean.predict(obs)?;
        let ls = self.log_std.as_slice().expect("contiguous");
        let lp = Array1::from_shape_fn(mean.nrows(), |i| {
            gaussian_logprob(mean.row(i).as_slice().expect("row"), ls, actions.row(i).as_slice().expect("row"))
        });
        Ok((lp, mean))
    }

    pub fn n_params(&self) -> usize {
        self.mean.n_params() + self.log_std.len()
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        self.mean.write_params(out);
        out.extend(self.log_std.iter());
    }

    pub fn read_params(&mut self, src: &[f64]) -> usize {
        let mut k = self.mean.read_params(src);
        for v in self.log_std.iter_mut() {
            *v = src[k];
            k += 1;
        }
        k
    }

    pub fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.log_std.iter().all(|v| v.is_finite())
    }
}
