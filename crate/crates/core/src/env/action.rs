//! Joint velocity commands integrated into position references.

use crate::dynamics::model::RobotModel;

/// `refs + clamp(a, ±max_speed)·dt`, clamped to the joint limits.
pub fn integrate_action(action: &[f64], refs: &[f64], dt: f64, max_speed: f64, model: &RobotModel) -> Vec<f64> {
    action
        .iter()
        .zip(refs)
        .zip(&model.joints)
        .map(|((&a, &r), joint)| joint.clamp(r + a.clamp(-max_speed, max_speed) * dt))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::{build_model, ModelConfig};

    #[test]
    fn examples() {
        let m = build_model(&ModelConfig::default()).unwrap();
        let speed = 180f64.to_radians();
        let refs = m.home.clone();
        assert_eq!(integrate_action(&[0.0; 8], &refs, 0.04, speed, &m), refs);
        let next = integrate_action(&[speed; 8], &refs, 0.04, speed, &m);
        for (n, r) in next.iter().zip(&refs) {
            assert!((n - r - 7.2f64.to_radians()).abs() < 1e-12);
        }
        let mut at_limit = refs.clone();
        at_limit[3] = m.joints[3].upper;
        let next = integrate_action(&[10.0; 8], &at_limit, 0.04, speed, &m);
        assert_eq!(next[3], m.joints[3].upper);
    }
}
