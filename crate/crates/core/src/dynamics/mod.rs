//! Planar simulator of a container on a tilting tray: equivalent-pendulum
//! slosh, dry-friction stick/slip of the container, the solid-object special
//! case, and a linear slosh oscillator used as a residual-vibration oracle.

mod contact;
mod linear;
mod motion;

pub use contact::{friction_margin, simulate_coupled, simulate_pendulum, simulate_solid_sliding};
pub use linear::{estimate_prv, residual_amplitude, simulate_linear_slosh, LinearTrace};
pub use motion::{FnMotion, MotionSample, SampledMotion, TrayMotion};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid plant parameters: {0}")]
    Params(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("contact lost at t = {t} s (normal force {normal} N)")]
    ContactLost { t: f64, normal: f64 },
    #[error("integration failure at t = {t} s: non-finite state {state:?}")]
    NonFinite { t: f64, state: [f64; 4] },
    #[error("too many contact transitions inside one step at t = {0} s")]
    Chattering(f64),
}

/// Physical parameters of the tray, container and liquid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    /// Sloshing mass (0 for a solid object).
    pub m: f64,
    /// Container plus non-sloshing liquid.
    #[serde(rename = "M")]
    pub m_container: f64,
    /// Equivalent pendulum length.
    pub l: f64,
    /// Height of the pendulum pivot (liquid surface) above the CoR.
    pub h: f64,
    pub d_z: f64,
    pub b_lc: f64,
    pub b_ct: f64,
    pub mu: f64,
    pub g: f64,
}

impl PlantParams {
    /// Desk-scale plant used throughout the tests: 5 cm pendulum, slosh
    /// damping ratio about 0.05.
    pub fn desk() -> Self {
        let (m, l, g) = (0.1, 0.05, crate::GRAVITY);
        let omega = (g / l).sqrt();
        PlantParams {
            m,
            m_container: 0.5,
            l,
            h: l,
            d_z: 0.02,
            b_lc: 2.0 * 0.05 * omega * m * l * l,
            b_ct: 0.05,
            mu: 0.3,
            g,
        }
    }

    /// The same plant with the liquid removed.
    pub fn solid(&self) -> Self {
        PlantParams { m: 0.0, b_lc: 0.0, ..*self }
    }

    pub fn omega_n(&self) -> f64 {
        (self.g / self.l).sqrt()
    }

    /// Damping ratio of the linearized slosh mode.
    pub fn delta(&self) -> f64 {
        self.b_lc / (2.0 * self.m * self.l * self.l * self.omega_n())
    }

    fn check_common(&self) -> Result<(), DynamicsError> {
        let finite = [self.m, self.m_container, self.l, self.h, self.d_z, self.b_lc, self.b_ct, self.mu, self.g]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(DynamicsError::Params("non-finite value".into()));
        }
        let checks = [
            (self.m_container > 0.0, "M must be positive"),
            (self.g > 0.0, "g must be positive"),
            (self.mu >= 0.0, "mu must be non-negative"),
            (self.b_ct >= 0.0, "b_ct must be non-negative"),
            (self.b_lc >= 0.0, "b_lc must be non-negative"),
            (self.m >= 0.0, "m must be non-negative"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(DynamicsError::Params((*msg).into())),
            None => Ok(()),
        }
    }

    /// Validation for the liquid models.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.check_common()?;
        if !(self.m > 0.0 && self.l > 0.0 && self.h > 0.0) {
            return Err(DynamicsError::Params("m, l and h must be positive for a liquid plant".into()));
        }
        if self.delta() >= 1.0 {
            return Err(DynamicsError::Params(format!("slosh damping ratio {} >= 1", self.delta())));
        }
        Ok(())
    }

    /// Validation for the solid-object model, which ignores m, l, h and b_lc.
    pub fn validate_solid(&self) -> Result<(), DynamicsError> {
        self.check_common()
    }
}

/// Contact state of the container on the tray. `Slip(s)` slides with
/// velocity sign `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactMode {
    Stick,
    Slip(i8),
}

impl ContactMode {
    pub fn code(self) -> i8 {
        match self {
            ContactMode::Stick => 0,
            ContactMode::Slip(s) => s,
        }
    }

    pub fn from_code(c: i8) -> Option<Self> {
        match c {
            0 => Some(ContactMode::Stick),
            1 | -1 => Some(ContactMode::Slip(c)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub theta: f64,
    pub theta_dot: f64,
    pub d_x: f64,
    pub d_x_dot: f64,
    pub mode: ContactMode,
}

impl SimState {
    pub fn rest() -> Self {
        SimState { theta: 0.0, theta_dot: 0.0, d_x: 0.0, d_x_dot: 0.0, mode: ContactMode::Stick }
    }

    fn vector(&self) -> [f64; 4] {
        [self.theta, self.theta_dot, self.d_x, self.d_x_dot]
    }

    fn from_vector(x: [f64; 4], mode: ContactMode) -> Self {
        SimState { theta: x[0], theta_dot: x[1], d_x: x[2], d_x_dot: x[3], mode }
    }
}

impl Default for SimState {
    fn default() -> Self {
        Self::rest()
    }
}

/// One logged sample: state plus both sides of the friction constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub state: SimState,
    pub demand: f64,
    pub f_s: f64,
}

impl TraceRow {
    pub fn margin(&self) -> f64 {
        self.demand.abs() - self.f_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub t: f64,
    pub from: ContactMode,
    pub to: ContactMode,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
    pub transitions: Vec<Transition>,
}

impl SimTrace {
    pub fn max_abs_theta(&self) -> f64 {
        self.rows.iter().map(|r| r.state.theta.abs()).fold(0.0, f64::max)
    }

    /// Largest distance of the container from its initial position.
    pub fn max_excursion(&self) -> f64 {
        let d0 = self.rows.first().map_or(0.0, |r| r.state.d_x);
        self.rows.iter().map(|r| (r.state.d_x - d0).abs()).fold(0.0, f64::max)
    }

    pub fn final_displacement(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.state.d_x - a.state.d_x,
            _ => 0.0,
        }
    }

    pub fn slipped(&self) -> bool {
        !self.transitions.is_empty() || self.rows.iter().any(|r| r.state.mode != ContactMode::Stick)
    }

    /// Time of the first logged sample whose demand exceeds F_s.
    pub fn first_violation(&self) -> Option<f64> {
        self.rows.iter().find(|r| r.margin() > 0.0).map(|r| r.t)
    }
}

/// Integration settings shared by the simulators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Sliding speed below which the container may re-stick.
    pub v_eps: f64,
    /// Width of the final bracket when localizing a stick/slip event.
    pub event_tol: f64,
    pub init: SimState,
}

impl SimOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SimOptions { dt, t_end, v_eps: 1e-6, event_tol: 1e-10, init: SimState::rest() }
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(DynamicsError::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(DynamicsError::Domain(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if !(self.event_tol > 0.0 && self.v_eps >= 0.0) {
            return Err(DynamicsError::Domain("event_tol must be positive and v_eps non-negative".into()));
        }
        Ok(())
    }
}
