//! Adaptive-moment optimizer over a flat parameter vector.

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// One bias-corrected update of `params` along `-grads`.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_rate_against_sign() {
        let mut opt = Adam::new(3, 1e-4);
        let mut p = vec![1.0, 1.0, 1.0];
        opt.update(&mut p, &[2.5, -0.01, 300.0]);
        assert!((p[0] - (1.0 - 1e-4)).abs() < 1e-9);
        assert!((p[1] - (1.0 + 1e-4)).abs() < 1e-8);
        assert!((p[2] - (1.0 - 1e-4)).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut opt = Adam::new(1, 0.1);
        let mut p = vec![1.0];
        opt.update(&mut p, &[1.0]);
        let (m, v, after) = (opt.m[0], opt.v[0], p[0]);
        let mut fresh = Adam::new(1, 0.1);
        let mut q = vec![1.0];
        fresh.update(&mut q, &[0.0]);
        assert_eq!(q[0], 1.0);
        opt.update(&mut p, &[0.0]);
        assert!(opt.m[0] < m && opt.v[0] < v);
        assert!(p[0] < after);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut opt = Adam::new(1, 0.05);
        let x0 = 5.0;
        let mut x = vec![x0];
        let mut prev = x0;
        for k in 0..500 {
            let g = 2.0 * x[0];
            opt.update(&mut x, &[g]);
            if k > 10 && x[0].abs() > 0.5 {
                assert!(x[0].abs() < prev.abs());
            }
            prev = x[0];
        }
        assert!(x[0].abs() < 0.1 * x0);
    }

    #[test]
    fn order_invariant() {
        let g = [0.3, -1.2, 4.0, 0.0];
        let mut a = Adam::new(4, 0.01);
        let mut pa = vec![1.0, 2.0, 3.0, 4.0];
        a.update(&mut pa, &g);
        let perm = [2, 0, 3, 1];
        let mut b = Adam::new(4, 0.01);
        let mut pb: Vec<f64> = perm.iter().map(|&i| [1.0, 2.0, 3.0, 4.0][i]).collect();
        let gb: Vec<f64> = perm.iter().map(|&i| g[i]).collect();
        b.update(&mut pb, &gb);
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(pb[k].to_bits(), pa[i].to_bits());
        }
    }
}
