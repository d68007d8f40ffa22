//! Tray motion inputs for the simulators.

/// Tray state at one instant: translation of the CoR in the x-z plane and
/// the tilt about the axis normal to that plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionSample {
    pub x: f64,
    pub z: f64,
    pub vx: f64,
    pub vz: f64,
    pub ax: f64,
    pub az: f64,
    pub beta: f64,
    pub beta_dot: f64,
    pub beta_ddot: f64,
}

impl MotionSample {
    fn lerp(&self, other: &Self, w: f64) -> Self {
        let f = |a: f64, b: f64| a + w * (b - a);
        MotionSample {
            x: f(self.x, other.x),
            z: f(self.z, other.z),
            vx: f(self.vx, other.vx),
            vz: f(self.vz, other.vz),
            ax: f(self.ax, other.ax),
            az: f(self.az, other.az),
            beta: f(self.beta, other.beta),
            beta_dot: f(self.beta_dot, other.beta_dot),
            beta_ddot: f(self.beta_ddot, other.beta_ddot),
        }
    }

    /// The same translation with the tilt channel removed.
    pub fn untilted(&self) -> Self {
        MotionSample { beta: 0.0, beta_dot: 0.0, beta_ddot: 0.0, ..*self }
    }
}

pub trait TrayMotion {
    fn sample(&self, t: f64) -> MotionSample;
}

/// Uniformly sampled motion, linearly interpolated and held at both ends.
///
/// Sampling at half the integration step makes every Runge-Kutta stage land
/// on a stored sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMotion {
    pub dt: f64,
    pub samples: Vec<MotionSample>,
}

impl SampledMotion {
    pub fn new(dt: f64, samples: Vec<MotionSample>) -> Self {
        assert!(dt > 0.0 && !samples.is_empty(), "sampled motion needs dt > 0 and at least one sample");
        SampledMotion { dt, samples }
    }

    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn without_tilt(&self) -> Self {
        SampledMotion { dt: self.dt, samples: self.samples.iter().map(MotionSample::untilted).collect() }
    }
}

impl TrayMotion for SampledMotion {
    fn sample(&self, t: f64) -> MotionSample {
        let last = self.samples.len() - 1;
        let u = t / self.dt;
        if !(u > 0.0) {
            return self.samples[0];
        }
        let k = u.round();
        if (u - k).abs() < 1e-9 {
            return self.samples[(k as usize).min(last)];
        }
        let i = u.floor() as usize;
        if i >= last {
            return self.samples[last];
        }
        self.samples[i].lerp(&self.samples[i + 1], u - i as f64)
    }
}

/// Motion given by a closure, for analytic test inputs.
pub struct FnMotion<F: Fn(f64) -> MotionSample>(pub F);

impl<F: Fn(f64) -> MotionSample> TrayMotion for FnMotion<F> {
    fn sample(&self, t: f64) -> MotionSample {
        (self.0)(t)
    }
}

/// The tray at rest.
impl TrayMotion for MotionSample {
    fn sample(&self, _t: f64) -> MotionSample {
        *self
    }
}
