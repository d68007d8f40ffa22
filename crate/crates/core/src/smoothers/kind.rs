use nalgebra::Complex;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{samples_for, SmootherError};

type C64 = Complex<f64>;

/// The four smoother families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmootherKind {
    /// Box kernel `1/T` on `[0, T]`.
    Rectangular { t: f64 },
    /// Half-sine kernel `(pi / 2T) sin(pi t / T)` on `[0, T]`.
    Harmonic { t: f64 },
    /// Two rectangular smoothers in series. `t1 == t2` is the triangular smoother.
    Trapezoidal { t1: f64, t2: f64 },
    /// Exponentially weighted harmonic kernel, `sigma <= 0` for a damped mode.
    DampedHarmonic { sigma: f64, t: f64 },
}

impl SmootherKind {
    pub fn triangular(t: f64) -> Self {
        SmootherKind::Trapezoidal { t1: t, t2: t }
    }

    pub fn validate(&self) -> Result<(), SmootherError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match *self {
            SmootherKind::Rectangular { t } | SmootherKind::Harmonic { t } => ok(t),
            SmootherKind::Trapezoidal { t1, t2 } => ok(t1) && ok(t2),
            SmootherKind::DampedHarmonic { sigma, t } => ok(t) && sigma.is_finite(),
        };
        if valid {
            Ok(())
        } else {
            Err(SmootherError::Domain(format!("time constants must be positive: {self:?}")))
        }
    }

    /// Kernel support, which is also the delay the smoother adds.
    pub fn support(&self) -> f64 {
        match *self {
            SmootherKind::Rectangular { t }
            | SmootherKind::Harmonic { t }
            | SmootherKind::DampedHarmonic { t, .. } => t,
            SmootherKind::Trapezoidal { t1, t2 } => t1 + t2,
        }
    }

    /// Support after rounding every constituent kernel up to whole samples.
    pub fn quantized_support(&self, dt: f64) -> f64 {
        let n = match *self {
            SmootherKind::Rectangular { t }
            | SmootherKind::Harmonic { t }
            | SmootherKind::DampedHarmonic { t, .. } => samples_for(t, dt),
            SmootherKind::Trapezoidal { t1, t2 } => samples_for(t1, dt) + samples_for(t2, dt),
        };
        n as f64 * dt
    }

    /// Filter order: how many continuity classes the smoother adds.
    pub fn order(&self) -> u32 {
        match self {
            SmootherKind::Rectangular { .. } => 1,
            _ => 2,
        }
    }
}

/// An ordered chain of smoothers applied in series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeSpec {
    pub stages: Vec<SmootherKind>,
}

impl CascadeSpec {
    pub fn new(stages: Vec<SmootherKind>) -> Self {
        CascadeSpec { stages }
    }

    pub fn validate(&self) -> Result<(), SmootherError> {
        if self.stages.is_empty() {
            return Err(SmootherError::Config("cascade has no stages".into()));
        }
        self.stages.iter().try_for_each(SmootherKind::validate)
    }

    pub fn support(&self) -> f64 {
        self.stages.iter().map(SmootherKind::support).sum()
    }

    pub fn quantized_support(&self, dt: f64) -> f64 {
        let n: usize = self
            .stages
            .iter()
            .map(|k| (k.quantized_support(dt) / dt).round() as usize)
            .sum();
        n as f64 * dt
    }

    /// Continuity classes added by the whole chain.
    pub fn order(&self) -> u32 {
        self.stages.iter().map(SmootherKind::order).sum()
    }

    /// Continuity class of the output for an input of class `input_class`
    /// (a step is class -1).
    pub fn output_class(&self, input_class: i32) -> i32 {
        input_class + self.order() as i32
    }
}

/// `(e^{z T} - 1) / z`, continuous through `z = 0`.
fn exp_ratio(z: C64, t: f64) -> C64 {
    let zt = z * t;
    if zt.norm() < 1e-5 {
        t * (C64::new(1.0, 0.0) + zt / 2.0 + zt * zt / 6.0 + zt * zt * zt / 24.0)
    } else {
        ((zt).exp() - 1.0) / z
    }
}

/// Transfer function `H(s)` of a single smoother.
///
/// Evaluated from the Laplace transform of the kernel, which stays finite
/// where the rational form has a removable pole-zero cancellation.
pub fn transfer(kind: &SmootherKind, s: C64) -> C64 {
    match *kind {
        SmootherKind::Rectangular { t } => exp_ratio(-s, t) / t,
        SmootherKind::Trapezoidal { t1, t2 } => exp_ratio(-s, t1) / t1 * exp_ratio(-s, t2) / t2,
        SmootherKind::Harmonic { t } => damped_transfer(0.0, t, s),
        SmootherKind::DampedHarmonic { sigma, t } => damped_transfer(sigma, t, s),
    }
}

fn damped_transfer(sigma: f64, t: f64, s: C64) -> C64 {
    let w = PI / t;
    let gain = (sigma * sigma + w * w) / (1.0 + (sigma * t).exp());
    let jw = C64::new(0.0, w);
    let base = C64::new(sigma, 0.0) - s;
    let diff = exp_ratio(base + jw, t) - exp_ratio(base - jw, t);
    diff * (gain / w) / C64::new(0.0, 2.0)
}

/// Magnitude of the frequency response on a grid of angular frequencies.
pub fn freq_response(kind: &SmootherKind, omega_grid: &[f64]) -> Vec<f64> {
    omega_grid
        .iter()
        .map(|&w| transfer(kind, C64::new(0.0, w)).norm())
        .collect()
}

impl CascadeSpec {
    pub fn transfer(&self, s: C64) -> C64 {
        self.stages
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, k| acc * transfer(k, s))
    }

    pub fn freq_response(&self, omega_grid: &[f64]) -> Vec<f64> {
        omega_grid
            .iter()
            .map(|&w| self.transfer(C64::new(0.0, w)).norm())
            .collect()
    }
}
