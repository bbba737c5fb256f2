//! One physics step: reference release, PID torques, contacts, forward
//! dynamics and semi-implicit Euler integration.
//!
//! Damping terms (PID derivative, contact normal damping and viscous
//! friction) are evaluated at the end-of-step velocity, which turns the
//! velocity update into the linear solve
//! `(M + dt·Σ JᵀDJ + dt·K_d) ν̇ = Bτ₀ + Σ Jᵀ(f₀ − DJν) − K_d ṡ − h`.
//! Contact clamps are resolved with a small active-set loop, so recorded
//! forces are exactly the applied ones and always satisfy `f_n >= 0`,
//! `|f_t| <= μ f_n`.

use nalgebra::{DMatrix, DVector};

use super::contact::{apply_law, contact_points, linear_law, Mode};
use super::kinematics::{rotate, Kinematics};
use super::model::{RobotModel, Vec2};
use super::state::SimState;

/// Generalized speeds beyond this bound (m/s or rad/s) count as divergence.
pub const MAX_SPEED: f64 = 1e4;

/// Force applied at a point attached to a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalForce {
    pub link: usize,
    /// Application point in the link frame.
    pub point: Vec2,
    /// World-frame force, N.
    pub force: Vec2,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("numerical divergence at t = {time:.3} s")]
    Diverged { time: f64 },
    #[error("state dimension {got} does not match model ({expected})")]
    Dimension { expected: usize, got: usize },
}

const MAX_ACTIVE_SET_PASSES: usize = 16;

/// Advances `state` by one physics step of `state.dt` seconds.
pub fn step(model: &RobotModel, state: &mut SimState, external: &[ExternalForce]) -> Result<(), DynamicsError> {
    let n = model.n_dofs();
    if state.q.len() != n || state.v.len() != n {
        return Err(DynamicsError::Dimension {
            expected: n,
            got: state.q.len(),
        });
    }
    let dt = state.dt;
    let nj = model.n_joints();
    state.release_references();

    let kin = Kinematics::compute(model, &state.q, &state.v);
    let mass = kin.mass_matrix(model);
    let bias = kin.bias_forces(model);

    let mut tau0 = vec![0.0; nj];
    let mut kd_eff = vec![0.0; nj];
    for (j, joint) in model.joints.iter().enumerate() {
        let e = state.active_ref[j] - state.q[3 + j];
        state.pid.integral[j] += e * dt;
        let g = joint.gains;
        let base = g.kp * e + g.ki * state.pid.integral[j];
        if let Some(lim) = model.torque_limit {
            let trial = base - g.kd * state.v[3 + j];
            if trial.abs() > lim {
                tau0[j] = trial.clamp(-lim, lim);
                continue;
            }
        }
        tau0[j] = base;
        kd_eff[j] = g.kd;
    }

    let mut rhs = -bias;
    for j in 0..nj {
        rhs[3 + j] += tau0[j] - kd_eff[j] * state.v[3 + j];
    }
    for ext in external {
        let p = kin.point(ext.link, ext.point);
        for (dof, col) in kin.point_partials(model, ext.link, p) {
            rhs[dof] += col.dot(&ext.force);
        }
    }

    let params = model.contact;
    let samples = contact_points(model, &kin);
    let partials: Vec<Vec<(usize, Vec2)>> = samples.iter().map(|s| kin.point_partials(model, s.link, s.position)).collect();
    let depths: Vec<f64> = samples.iter().map(|s| -s.position.y).collect();
    let mut modes: Vec<Mode> = samples
        .iter()
        .zip(&depths)
        .map(|(s, &d)| {
            if d <= 0.0 {
                return Mode::Off;
            }
            let normal = (params.stiffness * d - params.damping * s.velocity.y).max(0.0);
            let ft = -params.tangential_damping * s.velocity.x;
            if ft.abs() <= params.friction * normal {
                Mode::Stick
            } else {
                Mode::Slip(ft.signum())
            }
        })
        .collect();

    let first = if model.fixed_base { 3 } else { 0 };
    let mut v_new = DVector::from_column_slice(&state.v);
    let mut forces = vec![Vec2::zeros(); samples.len()];
    for _ in 0..MAX_ACTIVE_SET_PASSES {
        let mut a = mass.clone();
        for j in 0..nj {
            a[(3 + j, 3 + j)] += dt * kd_eff[j];
        }
        let mut b = rhs.clone();
        for (i, s) in samples.iter().enumerate() {
            if modes[i] == Mode::Off {
                continue;
            }
            let (f0, d) = linear_law(&params, depths[i], modes[i]);
            let f_now = apply_law(f0, &d, s.velocity);
            for &(ra, ja) in &partials[i] {
                b[ra] += ja.dot(&f_now);
                for &(rc, jc) in &partials[i] {
                    let djc = Vec2::new(d[0][0] * jc.x + d[0][1] * jc.y, d[1][0] * jc.x + d[1][1] * jc.y);
                    a[(ra, rc)] += dt * ja.dot(&djc);
                }
            }
        }
        let sub_a = a.view((first, first), (n - first, n - first)).into_owned();
        let sub_b = b.rows(first, n - first).into_owned();
        let acc = sub_a.lu().solve(&sub_b).ok_or(DynamicsError::Diverged { time: state.time() })?;
        v_new = DVector::from_column_slice(&state.v);
        for k in 0..(n - first) {
            v_new[first + k] += dt * acc[k];
        }

        let mut changed = false;
        for (i, _) in samples.iter().enumerate() {
            if modes[i] == Mode::Off {
                forces[i] = Vec2::zeros();
                continue;
            }
            let u = partials[i].iter().fold(Vec2::zeros(), |acc, &(dof, col)| acc + col * v_new[dof]);
            let (f0, d) = linear_law(&params, depths[i], modes[i]);
            let f = apply_law(f0, &d, u);
            if f.y < 0.0 {
                modes[i] = Mode::Off;
                changed = true;
            } else if modes[i] == Mode::Stick && f.x.abs() > params.friction * f.y {
                modes[i] = Mode::Slip(f.x.signum());
                changed = true;
            }
            forces[i] = f;
        }
        if !changed {
            break;
        }
    }

    if !v_new.iter().all(|x| x.is_finite() && x.abs() < MAX_SPEED) {
        return Err(DynamicsError::Diverged { time: state.time() });
    }
    for (i, c) in state.contacts.iter_mut().enumerate() {
        let f = if modes[i] == Mode::Off { Vec2::zeros() } else { forces[i] };
        c.normal_force = f.y.max(0.0);
        // The slip law can leave a rounding-level excess over the cone.
        let limit = params.friction * c.normal_force;
        c.tangential_force = f.x.clamp(-limit, limit);
        c.in_contact = depths[i] > 0.0 && f.y > 0.0;
    }
    for j in 0..nj {
        state.torques[j] = tau0[j] - kd_eff[j] * v_new[3 + j];
    }

    let lin = rotate(state.q[2], Vec2::new(v_new[0], v_new[1]));
    state.q[0] += dt * lin.x;
    state.q[1] += dt * lin.y;
    for k in 2..n {
        state.q[k] += dt * v_new[k];
    }
    state.v.copy_from_slice(v_new.as_slice());
    state.tick += 1;
    if !state.is_finite() {
        return Err(DynamicsError::Diverged { time: state.time() });
    }
    state.refresh_contact_positions(model);
    Ok(())
}

/// Solves `M ν̇ = rhs` for the unconstrained system (used by tests and
/// diagnostics).
pub fn forward_dynamics(mass: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    mass.clone().cholesky().map(|c| c.solve(rhs))
}
