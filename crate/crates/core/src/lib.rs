//! Feed-forward trajectory generation for carrying objects on a tray without
//! grasping them.
//!
//! The pipeline is: a [`smoothers`] cascade turns a goal or a raw reference
//! into a smooth path with known derivatives, [`compensation`] tilts the tray
//! so the apparent gravity stays normal to it, and [`planner`] picks the
//! cascade for each scenario. [`dynamics`] simulates the liquid slosh and the
//! dry-friction sliding of the carried object to validate the result.

pub mod compensation;
pub mod dynamics;
pub mod planner;
pub mod smoothers;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;
