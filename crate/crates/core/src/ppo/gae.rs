//! Generalized advantage estimation.

use super::batch::SegmentEnd;
use super::PpoError;

/// Backward GAE recursion over a batch of segments.
///
/// `δ_t = r_t + γ V_{t+1} − V_t` with `V_{t+1} = 0` after a failure and the
/// carried bootstrap value after a cut; `A_t = δ_t + γ λ A_{t+1}` inside a
/// segment. Returns `(advantages, returns)` with `returns = A + V`.
pub fn compute_advantages(rewards: &[f64], values: &[f64], ends: &[SegmentEnd], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    let n = rewards.len();
    assert!(values.len() == n && ends.len() == n, "batch columns differ in length");
    let mut adv = vec![0.0; n];
    for t in (0..n).rev() {
        let (next_value, carry) = match ends[t] {
            SegmentEnd::Failure => (0.0, 0.0),
            SegmentEnd::Bootstrap(v) => (v, 0.0),
            SegmentEnd::Continue if t + 1 < n => (values[t + 1], adv[t + 1]),
            SegmentEnd::Continue => return Err(PpoError::MissingBootstrap { index: t }),
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        adv[t] = delta + gamma * lambda * carry;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
/// A constant input is only centered.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a -= mean;
        if std > 1e-12 {
            *a /= std;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_step_hand_example() {
        let (adv, ret) = compute_advantages(&[1.0, 1.0], &[0.0, 0.0], &[SegmentEnd::Continue, SegmentEnd::Failure], 0.5, 1.0).unwrap();
        assert_eq!(adv, vec![1.5, 1.0]);
        assert_eq!(ret, adv);
    }

    #[test]
    fn lambda_one_matches_discounted_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let len = rng.random_range(1..60);
            let gamma = rng.random_range(0.5..1.0);
            let rewards: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..90.0)).collect();
            let mut ends = vec![SegmentEnd::Continue; len];
            ends[len - 1] = SegmentEnd::Failure;
            let (adv, _) = compute_advantages(&rewards, &vec![0.0; len], &ends, gamma, 1.0).unwrap();
            for t in 0..len {
                let mut g = 0.0;
                for (k, r) in rewards[t..].iter().enumerate() {
                    g += gamma.powi(k as i32) * r;
                }
                assert!((adv[t] - g).abs() <= 1e-10 * g.abs().max(1.0));
            }
        }
    }

    #[test]
    fn bootstrapped_fixed_point() {
        let (r, gamma) = (3.0, 0.95);
        let v = r / (1.0 - gamma);
        let mut ends = vec![SegmentEnd::Continue; 50];
        ends[49] = SegmentEnd::Bootstrap(v);
        let (adv, ret) = compute_advantages(&[r; 50], &[v; 50], &ends, gamma, 0.9).unwrap();
        assert!(adv.iter().all(|a| a.abs() <= 1e-10));
        assert!(ret.iter().all(|x| (x - v).abs() <= 1e-10));
    }

    #[test]
    fn missing_bootstrap_is_an_error() {
        let e = compute_advantages(&[1.0], &[0.0], &[SegmentEnd::Continue], 0.9, 1.0).unwrap_err();
        assert!(matches!(e, PpoError::MissingBootstrap { index: 0 }));
    }

    #[test]
    fn normalization_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a: Vec<f64> = (0..10_000).map(|_| rng.random_range(-300.0..900.0)).collect();
        normalize_advantages(&mut a);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() <= 1e-10);
        assert!((std - 1.0).abs() <= 1e-6);
    }
}
