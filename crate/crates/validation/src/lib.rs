//! Shared scenario builders for the acceptance suite in `tests/`.

use nalgebra::Vector2;

use waiter_core::dynamics::{PlantParams, SampledMotion};
use waiter_core::planner::{p2p_trajectory, plan, Material, Scenario};
use waiter_core::smoothers::{CascadeSpec, SmootherKind};

/// Liquid plant whose pendulum pivots at the CoR height (`l == h`) and whose
/// container sits on the CoR (`d_z == 0`).
pub fn centered_plant(mu: f64) -> PlantParams {
    PlantParams { mu, d_z: 0.0, ..PlantParams::desk() }
}

/// Straight move of `h` along x through `stages`, sampled at `dt` and held
/// for `tail` seconds afterwards.
pub fn planar_move(h: f64, stages: Vec<SmootherKind>, dt: f64, tail: f64, tilt: bool) -> SampledMotion {
    let mut s = Scenario::point_to_point(Material::Solid, [0.0; 3], [h, 0.0, 0.0], 1.0, 1.0);
    s.free_t = Some(0.05);
    s.tilt = tilt;
    let mut p = plan(&s).expect("valid scenario");
    p.cascade = CascadeSpec::new(stages);
    let traj = p2p_trajectory(&s, &p, dt, tail).expect("trajectory");
    traj.planar_motion(Vector2::x(), s.g, tilt).expect("no free fall")
}

/// Triangular velocity profile of total duration `t`.
pub fn triangular_move(h: f64, t: f64, dt: f64, tail: f64) -> SampledMotion {
    planar_move(h, vec![SmootherKind::triangular(0.5 * t)], dt, tail, false)
}
