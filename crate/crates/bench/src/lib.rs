//! Fixed scenarios shared by the benchmarks.

use nhimpact_core::catalog::{make_particle_in_disk, make_rolling_disk, RollingDisk};
use nhimpact_core::stepper::project_to_discrete_constraint;
use nhimpact_core::{Model, StepperConfig, Vector};

/// A model with its initial pair, step size and step count.
pub struct Scenario {
    pub model: Model,
    pub q0: Vector,
    pub q1: Vector,
    /// Continuous initial velocity the pair was taken from.
    pub v0: Vector,
    pub h: f64,
    pub steps: usize,
}

fn unit_disk() -> RollingDisk {
    RollingDisk {
        mass: 1.0,
        roll_inertia: 1.0,
        turn_inertia: 1.0,
        radius: 1.0,
    }
}

fn disk_arc(a: f64, q0: Vector, omega: f64, turn: f64, h: f64, steps: usize) -> Scenario {
    let model = make_rolling_disk(1.0, 1.0, 1.0, 1.0, a).expect("valid parameters");
    let guess = unit_disk().arc(&q0, omega, turn, h);
    let q1 = project_to_discrete_constraint(
        model.constraints.as_ref(),
        &q0,
        &guess,
        &StepperConfig::default().newton,
    )
    .expect("projection converges");
    let v0 = unit_disk().velocity(&q0, omega, turn);
    Scenario {
        model,
        q0,
        q1,
        v0,
        h,
        steps,
    }
}

/// Disk arc inside a large table: interior steps only.
pub fn disk_interior(steps: usize) -> Scenario {
    disk_arc(
        10.0,
        Vector::from_vec(vec![0.0, 0.0, 0.0, 0.0]),
        0.5,
        1.0,
        0.01,
        steps,
    )
}

/// Disk arc that meets the edge of the default table once.
pub fn disk_wall() -> Scenario {
    disk_arc(
        3.0,
        Vector::from_vec(vec![0.0, 0.0, 0.0, 0.3]),
        1.0,
        0.2,
        0.01,
        300,
    )
}

/// Particle bouncing along a diameter of the unit disk.
pub fn billiard(steps: usize) -> Scenario {
    Scenario {
        model: make_particle_in_disk(1.0, 1.0).expect("valid parameters"),
        q0: Vector::from_vec(vec![0.0, 0.0]),
        q1: Vector::from_vec(vec![0.01, 0.0]),
        v0: Vector::from_vec(vec![1.0, 0.0]),
        h: 0.01,
        steps,
    }
}

/// Disk configuration on the `C+` edge with an incoming velocity.
pub fn disk_boundary_state() -> (Model, Vector, Vector) {
    let model = make_rolling_disk(1.0, 1.0, 1.0, 1.0, 3.0).expect("valid parameters");
    let phi: f64 = 0.3;
    let q = Vector::from_vec(vec![3.0 - phi.cos(), -phi.sin(), 0.0, phi]);
    let v = unit_disk().velocity(&q, 1.0, 0.4);
    (model, q, v)
}
