//! Discrete realizations of the two primitive kernels. Both operate on
//! deviations from the pre-charge value, so a held input maps to an exactly
//! zero internal state.

use nalgebra::{Matrix2, Matrix4, Vector2};
use std::collections::VecDeque;
use std::f64::consts::PI;

use super::{Jet, JET_LEN};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Rectangular kernel of `n` samples: an integrator whose delayed copy is
/// subtracted, with the window integral taken by the trapezoid rule.
#[derive(Debug, Clone)]
pub(super) struct BoxStage {
    n: usize,
    period: f64,
    // inputs u[k-n-2] ..= u[k-1]
    history: VecDeque<Jet>,
    window: CompensatedSum,
}

impl BoxStage {
    pub(super) fn new(n: usize, dt: f64) -> Self {
        BoxStage {
            n,
            period: n as f64 * dt,
            history: std::iter::repeat_n(Jet::default(), n + 2).collect(),
            window: CompensatedSum::default(),
        }
    }

    pub(super) fn step(&mut self, u: Jet) -> Jet {
        let prev = self.history.back().copied().unwrap_or_default();
        self.history.push_back(u);
        // history now covers u[k-n-2] ..= u[k]
        let delayed = self.history[2];
        let before_delayed = self.history[1];
        self.history.pop_front();

        self.window.add(0.5 * (u.pos() + prev.pos()));
        self.window.add(-0.5 * (delayed.pos() + before_delayed.pos()));

        let mut out = [0.0; JET_LEN];
        out[0] = self.window.value() / self.n as f64;
        for j in 0..JET_LEN - 1 {
            out[j + 1] = (u.0[j] - delayed.0[j]) / self.period;
        }
        Jet(out)
    }
}

/// Harmonic / damped harmonic kernel: a two-impulse shaper
/// `v = K (u + e^{sigma T} u(t - T))` feeding the oscillator
/// `y'' = v + 2 sigma y' - (sigma^2 + (pi/T)^2) y`.
///
/// The oscillator is discretized exactly for a piecewise-linear `v`, so the
/// second impulse cancels the free response at `t = T` and the kernel keeps
/// its finite support.
#[derive(Debug, Clone)]
pub(super) struct OscillatorStage {
    gain: f64,
    weight: f64,
    a0: f64,
    a1: f64,
    phi: Matrix2<f64>,
    hold: Vector2<f64>,
    ramp: Vector2<f64>,
    // inputs u[k-n] ..= u[k-1]
    history: VecDeque<Jet>,
    state: Vector2<f64>,
    v_prev: f64,
}

impl OscillatorStage {
    pub(super) fn new(sigma: f64, n: usize, dt: f64) -> Self {
        let t = n as f64 * dt;
        let w = PI / t;
        let a0 = sigma * sigma + w * w;
        let a1 = -2.0 * sigma;
        let weight = (sigma * t).exp();
        let gain = a0 / (1.0 + weight);

        // Augmented state (y, y', v, v') with v' constant over one sample.
        #[rustfmt::skip]
        let m = Matrix4::new(
            0.0, 1.0, 0.0, 0.0,
            -a0, -a1, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 0.0, 0.0,
        ) * dt;
        let e = m.exp();
        let phi = e.fixed_view::<2, 2>(0, 0).into_owned();
        let mut hold = Vector2::new(e[(0, 2)], e[(1, 2)]);
        let mut ramp = Vector2::new(e[(0, 3)], e[(1, 3)]) / dt;

        // Renormalize the discrete DC gain to one.
        let steady = (Matrix2::identity() - phi)
            .try_inverse()
            .map(|inv| inv * hold)
            .unwrap_or(Vector2::new(1.0 / a0, 0.0));
        let dc = steady[0] * a0;
        hold /= dc;
        ramp /= dc;

        OscillatorStage {
            gain,
            weight,
            a0,
            a1,
            phi,
            hold,
            ramp,
            history: std::iter::repeat_n(Jet::default(), n).collect(),
            state: Vector2::zeros(),
            v_prev: 0.0,
        }
    }

    pub(super) fn step(&mut self, u: Jet) -> Jet {
        self.history.push_back(u);
        let delayed = self.history.pop_front().unwrap_or_default();
        let v: [f64; JET_LEN] =
            std::array::from_fn(|j| self.gain * (u.0[j] + self.weight * delayed.0[j]));

        self.state = self.phi * self.state + self.hold * self.v_prev + self.ramp * (v[0] - self.v_prev);
        self.v_prev = v[0];

        let mut out = [0.0; JET_LEN];
        out[0] = self.state[0];
        out[1] = self.state[1];
        for j in 2..JET_LEN {
            out[j] = v[j - 2] - self.a0 * out[j - 2] - self.a1 * out[j - 1];
        }
        Jet(out)
    }
}

#[derive(Debug, Clone)]
pub(super) enum Stage {
    Box(BoxStage),
    Oscillator(OscillatorStage),
}

impl Stage {
    pub(super) fn step(&mut self, u: Jet) -> Jet {
        match self {
            Stage::Box(s) => s.step(u),
            Stage::Oscillator(s) => s.step(u),
        }
    }
}
