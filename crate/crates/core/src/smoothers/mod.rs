//! Smoothers: finite-support, unit-area filters used both as point-to-point
//! trajectory generators (fed with a step) and as reference filters.
//!
//! Every stage is realized so that it reports the filtered signal together
//! with its time derivatives (see [`Jet`]); nothing downstream has to
//! differentiate the filtered position numerically.
//!
//! Sampling semantics: the input samples are treated as the nodes of a
//! piecewise-linear signal, and each stage returns the exact continuous-time
//! convolution of that signal with its kernel, sampled on the grid. Kernel
//! durations are rounded up to a whole number of samples.

mod kind;
mod stage;
mod state;

pub use kind::{freq_response, transfer, CascadeSpec, SmootherKind};
pub use state::{Cascade, SmootherState};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Number of channels carried by a [`Jet`]: the value plus four derivatives.
pub const JET_LEN: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmootherError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// A sample of a signal and its first four time derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Jet(pub [f64; JET_LEN]);

impl Jet {
    /// A signal that has been sitting at `value` forever.
    pub fn constant(value: f64) -> Self {
        let mut d = [0.0; JET_LEN];
        d[0] = value;
        Jet(d)
    }

    pub fn pos(&self) -> f64 {
        self.0[0]
    }
    pub fn vel(&self) -> f64 {
        self.0[1]
    }
    pub fn acc(&self) -> f64 {
        self.0[2]
    }
    pub fn jerk(&self) -> f64 {
        self.0[3]
    }
    pub fn snap(&self) -> f64 {
        self.0[4]
    }

    pub fn scaled(&self, k: f64) -> Jet {
        Jet(self.0.map(|v| v * k))
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        Jet(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

/// Number of samples spanned by a kernel of duration `duration`, rounded up
/// so that constraint-derived durations are never shortened.
pub fn samples_for(duration: f64, dt: f64) -> usize {
    let ratio = duration / dt;
    let n = (ratio - 1e-9 * ratio.max(1.0)).ceil();
    (n as usize).max(1)
}

fn require_positive(name: &str, v: f64) -> Result<(), SmootherError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(SmootherError::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Time constants of the trapezoidal smoother that turns a step of amplitude
/// `h` into the minimum-time motion under velocity and acceleration limits.
///
/// When `v_max` cannot be reached (`h * a_max < v_max^2`) the result is the
/// triangular profile `T1 = T2 = sqrt(h / a_max)`.
pub fn make_trapezoidal_params(h: f64, v_max: f64, a_max: f64) -> Result<(f64, f64), SmootherError> {
    require_positive("h", h)?;
    require_positive("v_max", v_max)?;
    require_positive("a_max", a_max)?;
    if h * a_max >= v_max * v_max {
        Ok((h / v_max, v_max / a_max))
    } else {
        let t = (h / a_max).sqrt();
        Ok((t, t))
    }
}

/// Harmonic smoother duration that places a zero of the frequency response
/// on the resonance `omega_n`.
pub fn make_harmonic_t(omega_n: f64) -> Result<f64, SmootherError> {
    require_positive("omega_n", omega_n)?;
    Ok(3.0 * PI / omega_n)
}

/// `(sigma, T)` of the damped harmonic smoother cancelling the oscillatory
/// pole pair of a second-order mode with natural frequency `omega_n` and
/// damping ratio `delta`.
pub fn make_damped_harmonic_params(omega_n: f64, delta: f64) -> Result<(f64, f64), SmootherError> {
    require_positive("omega_n", omega_n)?;
    if !(0.0..1.0).contains(&delta) {
        return Err(SmootherError::Domain(format!(
            "damping ratio must satisfy 0 <= delta < 1, got {delta}"
        )));
    }
    let sigma = -delta * omega_n;
    let t = 1.5 * 2.0 * PI / (omega_n * (1.0 - delta * delta).sqrt());
    Ok((sigma, t))
}
