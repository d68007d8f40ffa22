//! Linearized slosh: `theta'' + 2 delta omega theta' + omega^2 theta = -x''/l`.

use super::DynamicsError;
use crate::smoothers::{samples_for, SmootherKind, SmootherState};
use crate::GRAVITY;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearTrace {
    pub dt: f64,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
}

impl LinearTrace {
    pub fn max_abs_theta(&self) -> f64 {
        self.theta.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

fn check_mode(omega_n: f64, delta: f64) -> Result<(), DynamicsError> {
    if !(omega_n.is_finite() && omega_n > 0.0) {
        return Err(DynamicsError::Domain(format!("omega_n must be positive, got {omega_n}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(DynamicsError::Domain(format!("delta must satisfy 0 <= delta < 1, got {delta}")));
    }
    Ok(())
}

/// Integrates the linear slosh mode driven by tray accelerations sampled at
/// `dt` (linearly interpolated between samples), starting from `init`.
/// The output has one sample per input sample.
pub fn simulate_linear_slosh(
    omega_n: f64,
    delta: f64,
    accel: &[f64],
    dt: f64,
    init: (f64, f64),
) -> Result<LinearTrace, DynamicsError> {
    check_mode(omega_n, delta)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::Domain(format!("dt must be positive, got {dt}")));
    }
    let l = GRAVITY / (omega_n * omega_n);
    let (c1, c0) = (2.0 * delta * omega_n, omega_n * omega_n);
    let f = |x: [f64; 2], a: f64| [x[1], -c1 * x[1] - c0 * x[0] - a / l];

    let mut x = [init.0, init.1];
    let mut theta = Vec::with_capacity(accel.len());
    let mut theta_dot = Vec::with_capacity(accel.len());
    if accel.is_empty() {
        return Ok(LinearTrace { dt, theta, theta_dot });
    }
    theta.push(x[0]);
    theta_dot.push(x[1]);
    for w in accel.windows(2) {
        let (a0, a1) = (w[0], w[1]);
        let am = 0.5 * (a0 + a1);
        let k1 = f(x, a0);
        let k2 = f([x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1]], am);
        let k3 = f([x[0] + 0.5 * dt * k2[0], x[1] + 0.5 * dt * k2[1]], am);
        let k4 = f([x[0] + dt * k3[0], x[1] + dt * k3[1]], a1);
        for i in 0..2 {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFinite { t: theta.len() as f64 * dt, state: [x[0], x[1], 0.0, 0.0] });
        }
        theta.push(x[0]);
        theta_dot.push(x[1]);
    }
    Ok(LinearTrace { dt, theta, theta_dot })
}

/// Amplitude of the free oscillation through `(theta, theta_dot)`.
pub fn residual_amplitude(theta: f64, theta_dot: f64, omega_n: f64, delta: f64) -> f64 {
    let wd = omega_n * (1.0 - delta * delta).sqrt();
    theta.hypot((theta_dot + delta * omega_n * theta) / wd)
}

/// Residual slosh left by a unit step shaped with `kind`, relative to the
/// residual left by the raw step at the same time.
///
/// The raw step has an impulsive acceleration; its response is that of the
/// free mode started from `theta = -1/l`, `theta' = 2 delta omega / l`.
pub fn estimate_prv(kind: &SmootherKind, omega_n: f64, delta: f64, dt: f64) -> Result<f64, DynamicsError> {
    check_mode(omega_n, delta)?;
    let mut smoother = SmootherState::new(*kind, dt).map_err(|e| DynamicsError::Domain(e.to_string()))?;
    let n = samples_for(kind.support(), dt).max(samples_for(kind.quantized_support(dt), dt)) + 3;
    let accel: Vec<f64> = (0..n).map(|k| smoother.step(if k == 0 { 0.0 } else { 1.0 }).acc()).collect();
    let tr = simulate_linear_slosh(omega_n, delta, &accel, dt, (0.0, 0.0))?;
    let shaped = residual_amplitude(tr.theta[n - 1], tr.theta_dot[n - 1], omega_n, delta);

    // the raw step happens half a sample after t = 0
    let elapsed = (n - 1) as f64 * dt - 0.5 * dt;
    let l = GRAVITY / (omega_n * omega_n);
    let raw = residual_amplitude(-1.0 / l, 2.0 * delta * omega_n / l, omega_n, delta)
        * (-delta * omega_n * elapsed).exp();
    Ok(shaped / raw)
}
