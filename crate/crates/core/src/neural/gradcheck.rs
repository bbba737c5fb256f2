//! Central finite-difference check of [`Mlp::backward`].

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;

use super::mlp::{Activation, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates skipped because a rectifier changed side inside `±h`.
    pub skipped_kinks: usize,
    pub max_relative_error: f64,
    /// Flat parameter index with the largest error.
    pub worst: Option<usize>,
}

fn loss(net: &Mlp, x: ArrayView2<f64>, w: ArrayView2<f64>) -> f64 {
    let out = net.predict(x).expect("input shape checked by caller");
    (&out * &w).sum()
}

fn relu_pattern(net: &Mlp, x: ArrayView2<f64>) -> Vec<bool> {
    let (_, cache) = net.forward(x).expect("input shape checked by caller");
    net.layers
        .iter()
        .enumerate()
        .filter(|(_, l)| l.activation == Activation::Relu)
        .flat_map(|(i, _)| cache.pre_activation(i).iter().map(|&z| z > 0.0).collect::<Vec<_>>())
        .collect()
}

/// Compares the analytic gradient of `Σ w ⊙ net(x)` with central differences
/// of step `h` on `coords` distinct random parameter coordinates. Coordinates
/// whose perturbation moves a rectifier across its kink are replaced by
/// others.
pub fn check_gradients<R: Rng + ?Sized>(net: &Mlp, x: ArrayView2<f64>, w: ArrayView2<f64>, coords: usize, h: f64, rng: &mut R) -> GradCheckReport {
    let (_, cache) = net.forward(x).expect("input width must match the network");
    let (grads, _) = net.backward(&cache, w).expect("weight width must match the output");
    let mut analytic = Vec::with_capacity(net.n_params());
    grads.write(&mut analytic);
    let mut params = Vec::with_capacity(net.n_params());
    net.write_params(&mut params);
    let base_pattern = relu_pattern(net, x);

    let order = sample(rng, params.len(), params.len());
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        checked: 0,
        skipped_kinks: 0,
        max_relative_error: 0.0,
        worst: None,
    };
    for k in order {
        if report.checked == coords {
            break;
        }
        let mut p = params.clone();
        p[k] = params[k] + h;
        probe.read_params(&p);
        let pattern_plus = relu_pattern(&probe, x);
        let plus = loss(&probe, x, w);
        p[k] = params[k] - h;
        probe.read_params(&p);
        let pattern_minus = relu_pattern(&probe, x);
        let minus = loss(&probe, x, w);
        if pattern_plus != base_pattern || pattern_minus != base_pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let scale = analytic[k].abs().max(numeric.abs());
        // Both vanish for parameters feeding only inactive units.
        let err = if scale == 0.0 { 0.0 } else { (analytic[k] - numeric).abs() / scale };
        if report.worst.is_none() || err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = Some(k);
        }
        report.checked += 1;
    }
    report
}

/// Random inputs and output weights for [`check_gradients`].
pub fn random_probe<R: Rng + ?Sized>(net: &Mlp, samples: usize, rng: &mut R) -> (Array2<f64>, Array2<f64>) {
    let x = Array2::from_shape_fn((samples, net.input_dim()), |_| rng.random_range(-1.0..1.0));
    let w = Array2::from_shape_fn((samples, net.output_dim()), |_| rng.random_range(-1.0..1.0));
    (x, w)
}
