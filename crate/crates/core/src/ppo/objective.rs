//! Clipped surrogate, clipped value loss and KL penalty with hand-written
//! gradients.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::neural::ActorCritic;

use super::PpoError;

/// `min(ρ A, clip(ρ, 1 − ε, 1 + ε) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// One minibatch, gathered from a batch.
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub observations: Array2<f64>,
    pub actions: Array2<f64>,
    pub old_log_probs: Vec<f64>,
    pub old_means: Array2<f64>,
    pub advantages: Vec<f64>,
    /// Value targets divided by the value scale.
    pub returns: Vec<f64>,
    /// Behavior value estimates divided by the value scale.
    pub old_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub clip: f64,
    /// Value clip divided by the value scale.
    pub value_clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Zero disables the penalty.
    pub kl_coeff: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub kl: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Loss and its gradient in [`ActorCritic::flat_params`] order. `old_log_std`
/// is the behavior policy's log-std.
pub fn ppo_loss(net: &ActorCritic, mb: &Minibatch, old_log_std: ArrayView1<f64>, w: &LossWeights) -> Result<(LossStats, Vec<f64>), PpoError> {
    let m = mb.observations.nrows();
    let inv_m = 1.0 / m as f64;
    let ls = &net.policy.log_std;
    let k = ls.len();
    let var: Vec<f64> = ls.iter().map(|l| (2.0 * l).exp()).collect();
    let half_log_2pi = 0.5 * (2.0 * PI).ln();

    let (mean, pcache) = net.policy.mean.forward(mb.observations.view())?;
    let mut g_mean = Array2::<f64>::zeros((m, k));
    let mut g_ls = vec![0.0; k];
    let mut stats = LossStats::default();
    let mut clipped = 0usize;

    for i in 0..m {
        let a = mb.actions.row(i);
        let mu = mean.row(i);
        let mut lp = 0.0;
        for j in 0..k {
            let d = a[j] - mu[j];
            lp += -ls[j] - half_log_2pi - 0.5 * d * d / var[j];
        }
        let ratio = (lp - mb.old_log_probs[i]).exp();
        let adv = mb.advantages[i];
        let unclipped = ratio * adv;
        let surr = clipped_surrogate(ratio, adv, w.clip);
        if (ratio - 1.0).abs() > w.clip {
            clipped += 1;
        }
        stats.policy -= surr * inv_m;
        // The clamped branch is constant in θ.
        let g_lp = if unclipped <= surr { -unclipped * inv_m } else { 0.0 };
        for j in 0..k {
            let d = a[j] - mu[j];
            g_mean[[i, j]] += g_lp * d / var[j];
            g_ls[j] += g_lp * (d * d / var[j] - 1.0);
        }

        let old_mu = mb.old_means.row(i);
        let mut kl = 0.0;
        for j in 0..k {
            let d = mu[j] - old_mu[j];
            let old_var = (2.0 * old_log_std[j]).exp();
            kl += ls[j] - old_log_std[j] + (old_var + d * d) / (2.0 * var[j]) - 0.5;
            if w.kl_coeff != 0.0 {
                g_mean[[i, j]] += w.kl_coeff * inv_m * d / var[j];
                g_ls[j] += w.kl_coeff * inv_m * (1.0 - (old_var + d * d) / var[j]);
            }
        }
        stats.kl += kl * inv_m;
    }
    stats.clip_fraction = clipped as f64 / m as f64;
    stats.entropy = ls.iter().map(|l| l + 0.5 + half_log_2pi).sum();
    for g in &mut g_ls {
        *g -= w.entropy_coef;
    }

    let (values, vcache) = net.value.forward(mb.observations.view())?;
    let mut g_value = Array2::<f64>::zeros((m, 1));
    for i in 0..m {
        let v = values[[i, 0]];
        let target = mb.returns[i];
        let old = mb.old_values[i];
        let v_clipped = old + (v - old).clamp(-w.value_clip, w.value_clip);
        let l1 = (v - target).powi(2);
        let l2 = (v_clipped - target).powi(2);
        stats.value += l1.max(l2) * inv_m;
        if l1 >= l2 {
            g_value[[i, 0]] = w.value_coef * 2.0 * (v - target) * inv_m;
        }
    }

    stats.total = stats.policy + w.value_coef * stats.value + w.kl_coeff * stats.kl - w.entropy_coef * stats.entropy;
    if !stats.total.is_finite() {
        return Err(PpoError::NonFinite(format!(
            "loss {} (policy {}, value {}, kl {})",
            stats.total, stats.policy, stats.value, stats.kl
        )));
    }

    let mut grads = Vec::with_capacity(net.n_params());
    let (pg, _) = net.policy.mean.backward(&pcache, g_mean.view())?;
    pg.write(&mut grads);
    grads.extend_from_slice(&g_ls);
    let (vg, _) = net.value.backward(&vcache, g_value.view())?;
    vg.write(&mut grads);
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(PpoError::NonFinite(format!("gradient coordinate {i} is {}", grads[i])));
    }
    Ok((stats, grads))
}

/// Mean `KL(old ‖ new)` of the current policy against recorded behavior
/// means over a batch of observations.
pub fn mean_kl(net: &ActorCritic, observations: ArrayView2<f64>, old_means: ArrayView2<f64>, old_log_std: ArrayView1<f64>) -> Result<f64, PpoError> {
    let mean = net.policy.mean.predict(observations)?;
    let ls = net.policy.log_std.as_slice().expect("contiguous");
    let old_ls = old_log_std.to_vec();
    let n = mean.nrows();
    let total: f64 = (0..n)
        .map(|i| crate::neural::gaussian_kl(old_means.row(i).as_slice().expect("row"), &old_ls, mean.row(i).as_slice().expect("row"), ls))
        .sum();
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clip_arithmetic() {
        assert!((clipped_surrogate(1.5, 2.0, 0.3) - 2.6).abs() < 1e-12);
        assert!((clipped_surrogate(0.5, -1.0, 0.3) + 0.7).abs() < 1e-12);
        assert_eq!(clipped_surrogate(1.0, -3.0, 0.3), -3.0);
    }

    #[test]
    fn clipped_never_exceeds_unclipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10_000 {
            let r = rng.random_range(0.0..3.0);
            let a = rng.random_range(-5.0..5.0);
            assert!(clipped_surrogate(r, a, 0.3) <= r * a);
        }
    }

    fn setup(rng: &mut ChaCha8Rng, m: usize) -> (ActorCritic, Minibatch, Array1<f64>) {
        let mut net = ActorCritic::new(5, 3, &[7, 6], 0.3, rng);
        // Larger output weights so that the mean actually depends on θ.
        for w in net.policy.mean.layers.last_mut().unwrap().weight.iter_mut() {
            *w *= 50.0;
        }
        let obs = Array2::from_shape_fn((m, 5), |_| rng.random_range(-1.0..1.0));
        let old_means = net.policy.mean.predict(obs.view()).unwrap();
        let actions = Array2::from_shape_fn((m, 3), |(i, j)| old_means[[i, j]] + 0.3 * rng.random_range(-2.0..2.0));
        let (old_lp, _) = net.policy.log_probs(obs.view(), actions.view()).unwrap();
        let values = net.value.predict(obs.view()).unwrap();
        let mb = Minibatch {
            observations: obs,
            actions,
            old_log_probs: old_lp.to_vec(),
            old_means,
            advantages: (0..m).map(|_| rng.random_range(-2.0..2.0)).collect(),
            returns: (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
            old_values: values.column(0).to_vec(),
        };
        let old_ls = net.policy.log_std.clone();
        (net, mb, old_ls)
    }

    #[test]
    fn ratio_one_gives_vanilla_policy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (net, mb, old_ls) = setup(&mut rng, 16);
        let w = LossWeights {
            clip: 0.3,
            value_clip: 1000.0,
            value_coef: 0.0,
            entropy_coef: 0.0,
            kl_coeff: 0.0,
        };
        let (stats, grads) = ppo_loss(&net, &mb, old_ls.view(), &w).unwrap();
        let mean_adv = mb.advantages.iter().sum::<f64>() / 16.0;
        assert!((stats.policy + mean_adv).abs() < 1e-12);
        assert_eq!(stats.clip_fraction, 0.0);
        // −mean(A ∇ log π), by finite differences of the log-likelihood.
        let base = net.flat_params();
        let h = 1e-6;
        for idx in [0, 11, base.len() - net.value.n_params() - 1] {
            let mut probe = net.clone();
            let mut p = base.clone();
            p[idx] += h;
            probe.set_flat_params(&p);
            let (lp_plus, _) = probe.policy.log_probs(mb.observations.view(), mb.actions.view()).unwrap();
            p[idx] -= 2.0 * h;
            probe.set_flat_params(&p);
            let (lp_minus, _) = probe.policy.log_probs(mb.observations.view(), mb.actions.view()).unwrap();
            let pg: f64 = (0..16).map(|i| -mb.advantages[i] * (lp_plus[i] - lp_minus[i]) / (2.0 * h)).sum::<f64>() / 16.0;
            assert!((grads[idx] - pg).abs() <= 1e-6 * pg.abs().max(1e-3), "{idx}: {} vs {pg}", grads[idx]);
        }
    }

    #[test]
    fn full_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (mut net, mb, old_ls) = setup(&mut rng, 12);
        // Move away from the behavior policy so clipping and KL are active.
        let mut p = net.flat_params();
        for v in p.iter_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
        net.set_flat_params(&p);
        let w = LossWeights {
            clip: 0.3,
            value_clip: 0.05,
            value_coef: 0.5,
            entropy_coef: 0.01,
            kl_coeff: 0.7,
        };
        let (_, grads) = ppo_loss(&net, &mb, old_ls.view(), &w).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for idx in 0..p.len() {
            let mut q = p.clone();
            q[idx] += h;
            let mut probe = net.clone();
            probe.set_flat_params(&q);
            let plus = ppo_loss(&probe, &mb, old_ls.view(), &w).unwrap().0.total;
            q[idx] -= 2.0 * h;
            probe.set_flat_params(&q);
            let minus = ppo_loss(&probe, &mb, old_ls.view(), &w).unwrap().0.total;
            let fd = (plus - minus) / (2.0 * h);
            worst = worst.max((fd - grads[idx]).abs());
        }
        assert!(worst < 1e-6, "max abs gradient error {worst}");
    }
}
