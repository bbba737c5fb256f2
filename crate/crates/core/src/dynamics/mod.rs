//! Planar floating-base rigid-body simulation of the biped.

pub mod centroidal;
pub mod contact;
pub mod integrator;
pub mod kinematics;
pub mod model;
pub mod pid;
pub mod state;

pub use centroidal::{centroidal, support_geometry, CentroidalQuantities, FootSupport, SupportGeometry};
pub use contact::contact_forces;
pub use integrator::{step, DynamicsError, ExternalForce};
pub use kinematics::{bias_forces, mass_matrix, Kinematics};
pub use model::{build_model, ModelConfig, ModelError, RobotModel, Side, Vec2};
pub use pid::pid_torques;
pub use state::{ContactPoint, PointKind, SimState, PHYSICS_DT};

/// Base height that puts the lowest sole point exactly on the ground for
/// the given joint angles and zero base pitch.
pub fn ground_touching_height(model: &RobotModel, joints: &[f64]) -> f64 {
    let mut q = vec![0.0, 0.0, 0.0];
    q.extend_from_slice(joints);
    let v = vec![0.0; q.len()];
    let kin = Kinematics::compute(model, &q, &v);
    let lowest = model
        .feet
        .iter()
        .flat_map(|f| f.points().map(|p| kin.point(f.link, p).y))
        .fold(f64::INFINITY, f64::min);
    -lowest
}

/// Robot at rest in its home posture with the soles on the ground.
pub fn standing_state(model: &RobotModel) -> SimState {
    let z = ground_touching_height(model, &model.home);
    SimState::new(model, [0.0, z, 0.0], &model.home)
}

/// True when any probe point of a non-foot link is at or below the ground.
pub fn non_foot_contact(model: &RobotModel, kin: &Kinematics) -> bool {
    model
        .links
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.is_foot)
        .any(|(k, l)| l.probes.iter().any(|&p| kin.point(k, p).y <= 0.0))
}
