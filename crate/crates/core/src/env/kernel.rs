//! Radial basis function kernel used to shape reward terms.

/// Kernel sensitivity used when a term does not override it.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Bandwidth `γ̃ = -ln ε / x_c²`, so that the kernel equals `ε` at distance
/// `x_c` from the target.
pub fn gamma(cutoff: f64, epsilon: f64) -> f64 {
    -epsilon.ln() / (cutoff * cutoff)
}

/// `exp(-γ̃ ‖x - x*‖²)`.
pub fn rbf_kernel(x: &[f64], target: &[f64], cutoff: f64, epsilon: f64) -> f64 {
    assert_eq!(x.len(), target.len(), "kernel arguments differ in dimension");
    let d2: f64 = x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
    rbf_from_sq_distance(d2, cutoff, epsilon)
}

pub fn rbf_scalar(x: f64, target: f64, cutoff: f64, epsilon: f64) -> f64 {
    rbf_from_sq_distance((x - target) * (x - target), cutoff, epsilon)
}

fn rbf_from_sq_distance(d2: f64, cutoff: f64, epsilon: f64) -> f64 {
    (epsilon.ln() * (d2 / (cutoff * cutoff))).exp()
}
