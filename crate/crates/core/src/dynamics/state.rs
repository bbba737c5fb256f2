use std::collections::VecDeque;

use super::model::{RobotModel, Side, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Heel,
    Toe,
}

/// Heel or toe of one foot with the last applied contact force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    pub side: Side,
    pub kind: PointKind,
    pub position: Vec2,
    pub normal_force: f64,
    pub tangential_force: f64,
    pub in_contact: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PidState {
    pub integral: Vec<f64>,
}

/// Joint references waiting for the actuation delay to elapse.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingReference {
    pub release_tick: u64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub contacts: Vec<ContactPoint>,
    pub pid: PidState,
    pub ref_queue: VecDeque<PendingReference>,
    /// References currently seen by the PIDs.
    pub active_ref: Vec<f64>,
    /// Torques applied during the last physics step.
    pub torques: Vec<f64>,
    pub tick: u64,
    pub dt: f64,
}

pub const PHYSICS_DT: f64 = 0.001;

impl SimState {
    /// Robot at rest with the given joint angles. References start at the
    /// joint angles themselves.
    pub fn new(model: &RobotModel, base: [f64; 3], joints: &[f64]) -> Self {
        assert_eq!(joints.len(), model.n_joints());
        let mut q = base.to_vec();
        q.extend_from_slice(joints);
        let contacts = model
            .feet
            .iter()
            .flat_map(|f| {
                [PointKind::Heel, PointKind::Toe].map(|kind| ContactPoint {
                    side: f.side,
                    kind,
                    position: Vec2::zeros(),
                    normal_force: 0.0,
                    tangential_force: 0.0,
                    in_contact: false,
                })
            })
            .collect();
        let mut s = SimState {
            v: vec![0.0; q.len()],
            q,
            contacts,
            pid: PidState {
                integral: vec![0.0; model.n_joints()],
            },
            ref_queue: VecDeque::new(),
            active_ref: joints.to_vec(),
            torques: vec![0.0; model.n_joints()],
            tick: 0,
            dt: PHYSICS_DT,
        };
        s.refresh_contact_positions(model);
        s
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn joints(&self) -> &[f64] {
        &self.q[3..]
    }

    pub fn joint_velocities(&self) -> &[f64] {
        &self.v[3..]
    }

    /// Queues a reference that the PIDs pick up once `delay` has elapsed.
    /// Release happens at the first physics tick at or after `now + delay`.
    pub fn enqueue_reference(&mut self, values: Vec<f64>, delay: f64) {
        let delay_ticks = (delay / self.dt - 1e-9).ceil().max(0.0) as u64;
        self.ref_queue.push_back(PendingReference {
            release_tick: self.tick + delay_ticks,
            values,
        });
    }

    /// Moves every due reference into `active_ref`.
    pub fn release_references(&mut self) {
        while let Some(front) = self.ref_queue.front() {
            if front.release_tick > self.tick {
                break;
            }
            let r = self.ref_queue.pop_front().expect("front exists");
            self.active_ref = r.values;
        }
    }

    /// Updates contact point positions without touching forces.
    pub fn refresh_contact_positions(&mut self, model: &RobotModel) {
        let kin = super::kinematics::Kinematics::compute(model, &self.q, &self.v);
        for c in &mut self.contacts {
            let foot = model.foot(c.side).expect("contact on a known foot");
            let local = match c.kind {
                PointKind::Heel => foot.heel,
                PointKind::Toe => foot.toe,
            };
            c.position = kin.point(foot.link, local);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.v).all(|x| x.is_finite())
    }
}
