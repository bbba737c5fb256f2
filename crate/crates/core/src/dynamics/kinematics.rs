//! Forward kinematics, mass matrix and bias forces.
//!
//! Generalized coordinates are `q = (x, z, pitch, s)` with the base pose in
//! world coordinates. Generalized velocities are `ν = (v_x, v_z, ω, ṡ)` where
//! the base linear velocity is expressed in the base frame, so
//! `(ẋ, ż) = R(pitch) (v_x, v_z)`.
//!
//! The equations of motion are assembled from per-link partial velocities
//! (Kane's method): `M = Σ m JᵀJ + I jᵀj` and
//! `h = Σ m Jᵀ (a_vp − g)`, where `a_vp` is the velocity-product part of the
//! link CoM acceleration.

use nalgebra::{DMatrix, DVector};

use super::model::{RobotModel, Vec2};

/// 2D rotation by `angle`.
pub fn rotate(angle: f64, v: Vec2) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Quarter-turn: `ω × r` for a scalar planar angular velocity is `ω·perp(r)`.
pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFrame {
    pub origin: Vec2,
    pub angle: f64,
    pub omega: f64,
    pub origin_vel: Vec2,
    /// Acceleration of the origin when `ν̇ = 0`.
    pub origin_bias: Vec2,
    pub com: Vec2,
    pub com_vel: Vec2,
    pub com_bias: Vec2,
}

#[derive(Debug, Clone)]
pub struct Kinematics {
    pub frames: Vec<LinkFrame>,
}

impl Kinematics {
    pub fn compute(model: &RobotModel, q: &[f64], v: &[f64]) -> Self {
        let n = model.n_dofs();
        debug_assert_eq!(q.len(), n);
        debug_assert_eq!(v.len(), n);
        let mut frames: Vec<LinkFrame> = Vec::with_capacity(model.links.len());
        for (k, link) in model.links.iter().enumerate() {
            let (origin, angle, omega, origin_vel, origin_bias) = match link.parent {
                None => {
                    let pitch = q[2];
                    let vel = rotate(pitch, Vec2::new(v[0], v[1]));
                    let bias = v[2] * perp(vel);
                    (Vec2::new(q[0], q[1]), pitch, v[2], vel, bias)
                }
                Some(p) => {
                    let pf = &frames[p];
                    let r = rotate(pf.angle, link.joint_offset);
                    let vel = pf.origin_vel + pf.omega * perp(r);
                    let bias = pf.origin_bias - pf.omega * pf.omega * r;
                    let j = 3 + (k - 1);
                    (pf.origin + r, pf.angle + q[j], pf.omega + v[j], vel, bias)
                }
            };
            let rc = rotate(angle, link.com);
            frames.push(LinkFrame {
                origin,
                angle,
                omega,
                origin_vel,
                origin_bias,
                com: origin + rc,
                com_vel: origin_vel + omega * perp(rc),
                com_bias: origin_bias - omega * omega * rc,
            });
        }
        Kinematics { frames }
    }

    /// World position of a point given in the frame of `link`.
    pub fn point(&self, link: usize, local: Vec2) -> Vec2 {
        let f = &self.frames[link];
        f.origin + rotate(f.angle, local)
    }

    pub fn point_velocity(&self, link: usize, world: Vec2) -> Vec2 {
        let f = &self.frames[link];
        f.origin_vel + f.omega * perp(world - f.origin)
    }

    /// Partial velocities of a world point rigidly attached to `link`, one
    /// per entry of the link's dof chain.
    pub fn point_partials(&self, model: &RobotModel, link: usize, world: Vec2) -> Vec<(usize, Vec2)> {
        let base = &self.frames[0];
        model.chains[link]
            .iter()
            .map(|&dof| {
                let col = match dof {
                    0 => rotate(base.angle, Vec2::new(1.0, 0.0)),
                    1 => rotate(base.angle, Vec2::new(0.0, 1.0)),
                    2 => perp(world - base.origin),
                    j => perp(world - self.frames[j - 2].origin),
                };
                (dof, col)
            })
            .collect()
    }

    /// Dense 2×n Jacobian of a world point attached to `link`.
    pub fn point_jacobian(&self, model: &RobotModel, link: usize, world: Vec2) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(2, model.n_dofs());
        for (dof, col) in self.point_partials(model, link, world) {
            j[(0, dof)] = col.x;
            j[(1, dof)] = col.y;
        }
        j
    }

    pub fn mass_matrix(&self, model: &RobotModel) -> DMatrix<f64> {
        let n = model.n_dofs();
        let mut m = DMatrix::zeros(n, n);
        for (k, link) in model.links.iter().enumerate() {
            let partials = self.point_partials(model, k, self.frames[k].com);
            for (a, (da, ja)) in partials.iter().enumerate() {
                for (db, jb) in &partials[..=a] {
                    let mut val = link.mass * ja.dot(jb);
                    if *da >= 2 && *db >= 2 {
                        val += link.inertia;
                    }
                    m[(*da, *db)] += val;
                    if da != db {
                        m[(*db, *da)] += val;
                    }
                }
            }
        }
        m
    }

    /// Coriolis, centrifugal and gravity generalized forces.
    pub fn bias_forces(&self, model: &RobotModel) -> DVector<f64> {
        let n = model.n_dofs();
        let mut h = DVector::zeros(n);
        let g = Vec2::new(0.0, -model.gravity);
        for (k, link) in model.links.iter().enumerate() {
            let f = link.mass * (self.frames[k].com_bias - g);
            for (dof, col) in self.point_partials(model, k, self.frames[k].com) {
                h[dof] += col.dot(&f);
            }
        }
        h
    }

    /// Gravity-only generalized force (the `ν = 0` part of the bias).
    pub fn gravity_forces(&self, model: &RobotModel) -> DVector<f64> {
        let n = model.n_dofs();
        let mut h = DVector::zeros(n);
        let g = Vec2::new(0.0, -model.gravity);
        for (k, link) in model.links.iter().enumerate() {
            let f = -link.mass * g;
            for (dof, col) in self.point_partials(model, k, self.frames[k].com) {
                h[dof] += col.dot(&f);
            }
        }
        h
    }

    pub fn potential_energy(&self, model: &RobotModel) -> f64 {
        model.links.iter().zip(&self.frames).map(|(l, f)| l.mass * model.gravity * f.com.y).sum()
    }
}

/// Mass matrix `M(q)`.
pub fn mass_matrix(model: &RobotModel, q: &[f64]) -> DMatrix<f64> {
    let zero = vec![0.0; model.n_dofs()];
    Kinematics::compute(model, q, &zero).mass_matrix(model)
}

/// Bias vector `h(q, ν)`.
pub fn bias_forces(model: &RobotModel, q: &[f64], v: &[f64]) -> DVector<f64> {
    Kinematics::compute(model, q, v).bias_forces(model)
}

/// Time derivative of `q` for the body-fixed base velocity convention.
pub fn q_dot(q: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    let lin = rotate(q[2], Vec2::new(v[0], v[1]));
    out[0] = lin.x;
    out[1] = lin.y;
    out
}

pub fn kinetic_energy(model: &RobotModel, q: &[f64], v: &[f64]) -> f64 {
    let m = mass_matrix(model, q);
    let nu = DVector::from_column_slice(v);
    0.5 * nu.dot(&(&m * &nu))
}
