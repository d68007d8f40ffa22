//! Stick/slip integration of the pendulum-container system.
//!
//! Smooth phases use fixed-step RK4. A step that crosses a contact event is
//! split at the event, located by bisection on the step length.

use super::motion::{MotionSample, TrayMotion};
use super::{ContactMode, DynamicsError, PlantParams, SimOptions, SimState, SimTrace, TraceRow, Transition};

const MAX_EVENTS_PER_STEP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Model {
    /// Pendulum plus sliding container.
    Coupled,
    /// Container only (no sloshing mass).
    Solid,
    /// Pendulum in a container fixed to the tray.
    Pendulum,
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    theta_ddot: f64,
    d_ddot: f64,
    demand: f64,
    normal: f64,
}

fn eval(model: Model, p: &PlantParams, x: &[f64; 4], mode: ContactMode, s: &MotionSample) -> Eval {
    match model {
        Model::Solid => eval_solid(p, x, mode, s),
        Model::Coupled => eval_coupled(p, x, mode, s),
        Model::Pendulum => eval_coupled(p, x, ContactMode::Stick, s),
    }
}

fn eval_coupled(p: &PlantParams, x: &[f64; 4], mode: ContactMode, s: &MotionSample) -> Eval {
    let [th, thd, dx, dxd] = *x;
    let (m, mc, l, h) = (p.m, p.m_container, p.l, p.h);
    let mt = m + mc;
    let (b, bd, bdd) = (s.beta, s.beta_dot, s.beta_ddot);
    let (sb, cb) = b.sin_cos();
    let (st, ct) = th.sin_cos();
    let (sbt, cbt) = (b + th).sin_cos();
    let gz = p.g + s.az;

    let p0 = p.b_lc / (m * l) * thd + (l - h * ct + dx * st) * bdd - ct * dx * bd * bd
        + st * (2.0 * bd * dxd - h * bd * bd)
        + sbt * gz
        + cbt * s.ax;
    let c0 = mt * (sb * gz + cb * s.ax) + p.b_ct * dxd + (l * ct - h) * m * bdd - p.d_z * mc * bdd
        - l * m * st * (bd + thd).powi(2)
        - mt * dx * bd * bd;
    let n0 = mt * (cb * gz - sb * s.ax + dx * bdd + 2.0 * bd * dxd - p.d_z * bd * bd)
        + m * (l * st * bdd + l * ct * thd * (2.0 * bd + thd) + bd * bd * (l * ct - h));

    let (theta_ddot, d_ddot) = match mode {
        ContactMode::Stick => (-p0 / l, 0.0),
        ContactMode::Slip(sign) => {
            // cos(th) dd + l thdd = -p0
            // mt dd + m l (cos(th) + s mu sin(th)) thdd = -c0 - s mu n0
            let s_mu = sign as f64 * p.mu;
            let k = m * l * (ct + s_mu * st);
            let rhs = -c0 - s_mu * n0;
            let det = ct * k - l * mt;
            ((ct * rhs + mt * p0) / det, (-p0 * k - l * rhs) / det)
        }
    };
    Eval {
        theta_ddot,
        d_ddot,
        demand: c0 + m * l * ct * theta_ddot,
        normal: n0 + m * l * st * theta_ddot,
    }
}

fn eval_solid(p: &PlantParams, x: &[f64; 4], mode: ContactMode, s: &MotionSample) -> Eval {
    let [_, _, dx, dxd] = *x;
    let mc = p.m_container;
    let (bd, bdd) = (s.beta_dot, s.beta_ddot);
    let (sb, cb) = s.beta.sin_cos();
    let gz = p.g + s.az;
    let demand = mc * (sb * gz + cb * s.ax) + p.b_ct * dxd - p.d_z * mc * bdd - mc * dx * bd * bd;
    let normal = mc * (cb * gz - sb * s.ax + dx * bdd + 2.0 * bd * dxd - p.d_z * bd * bd);
    let d_ddot = match mode {
        ContactMode::Stick => 0.0,
        ContactMode::Slip(sign) => (-demand - sign as f64 * p.mu * normal) / mc,
    };
    Eval { theta_ddot: 0.0, d_ddot, demand, normal }
}

/// Tangential force the contact must transmit to keep the container still,
/// and the static friction bound `F_s`, for the given state and tray sample.
pub fn friction_margin(state: &SimState, params: &PlantParams, sample: &MotionSample) -> (f64, f64) {
    let model = if params.m > 0.0 { Model::Coupled } else { Model::Solid };
    let e = eval(model, params, &state.vector(), state.mode, sample);
    (e.demand, params.mu * e.normal)
}

struct Engine<'a, M: TrayMotion + ?Sized> {
    model: Model,
    p: &'a PlantParams,
    motion: &'a M,
    opts: SimOptions,
}

impl<M: TrayMotion + ?Sized> Engine<'_, M> {
    fn deriv(&self, x: &[f64; 4], mode: ContactMode, t: f64) -> [f64; 4] {
        let e = eval(self.model, self.p, x, mode, &self.motion.sample(t));
        match mode {
            ContactMode::Stick => [x[1], e.theta_ddot, 0.0, 0.0],
            ContactMode::Slip(_) => [x[1], e.theta_ddot, x[3], e.d_ddot],
        }
    }

    fn rk4(&self, x: &[f64; 4], mode: ContactMode, t: f64, h: f64) -> [f64; 4] {
        let add = |a: &[f64; 4], k: &[f64; 4], w: f64| std::array::from_fn(|i| a[i] + w * k[i]);
        let k1 = self.deriv(x, mode, t);
        let k2 = self.deriv(&add(x, &k1, 0.5 * h), mode, t + 0.5 * h);
        let k3 = self.deriv(&add(x, &k2, 0.5 * h), mode, t + 0.5 * h);
        let k4 = self.deriv(&add(x, &k3, h), mode, t + h);
        std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }

    fn at(&self, x: &[f64; 4], mode: ContactMode, t: f64) -> Eval {
        eval(self.model, self.p, x, mode, &self.motion.sample(t))
    }

    fn stick_admissible(&self, e: &Eval) -> bool {
        e.demand.abs() <= self.p.mu * e.normal
    }

    fn check(&self, x: &[f64; 4], e: &Eval, t: f64) -> Result<(), DynamicsError> {
        if !x.iter().all(|v| v.is_finite()) || !e.demand.is_finite() || !e.normal.is_finite() {
            return Err(DynamicsError::NonFinite { t, state: *x });
        }
        if self.model != Model::Pendulum && e.normal <= 0.0 {
            return Err(DynamicsError::ContactLost { t, normal: e.normal });
        }
        Ok(())
    }

    /// Smallest step length in `(0, h]` for which `fails` holds, assuming it
    /// holds at `h` and not at 0.
    fn bisect(&self, h: f64, fails: impl Fn(f64) -> bool) -> f64 {
        let (mut lo, mut hi) = (0.0, h);
        while hi - lo > self.opts.event_tol {
            let mid = 0.5 * (lo + hi);
            if fails(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Mode the contact takes when the container is at rest relative to the tray.
    fn mode_at_rest(&self, x: &[f64; 4], t: f64) -> ContactMode {
        let e = self.at(x, ContactMode::Stick, t);
        if self.model == Model::Pendulum || self.stick_admissible(&e) {
            ContactMode::Stick
        } else {
            ContactMode::Slip(if e.demand > 0.0 { -1 } else { 1 })
        }
    }

    fn advance(
        &self,
        x: &mut [f64; 4],
        mode: &mut ContactMode,
        t0: f64,
        t1: f64,
        transitions: &mut Vec<Transition>,
    ) -> Result<(), DynamicsError> {
        let mut t = t0;
        for _ in 0..MAX_EVENTS_PER_STEP {
            let h = t1 - t;
            if h <= 0.0 {
                return Ok(());
            }
            let x1 = self.rk4(x, *mode, t, h);
            let e1 = self.at(&x1, *mode, t1);
            self.check(&x1, &e1, t1)?;

            let event = match *mode {
                _ if self.model == Model::Pendulum => None,
                ContactMode::Stick if !self.stick_admissible(&e1) => Some(self.bisect(h, |tau| {
                    let xm = self.rk4(x, ContactMode::Stick, t, tau);
                    !self.stick_admissible(&self.at(&xm, ContactMode::Stick, t + tau))
                })),
                ContactMode::Slip(s) if s as f64 * x1[3] < 0.0 => Some(self.bisect(h, |tau| {
                    s as f64 * self.rk4(x, *mode, t, tau)[3] <= 0.0
                })),
                _ => None,
            };

            match event {
                None => {
                    *x = x1;
                    if let ContactMode::Slip(_) = *mode {
                        if x[3].abs() < self.opts.v_eps {
                            let mut rest = *x;
                            rest[3] = 0.0;
                            if self.stick_admissible(&self.at(&rest, ContactMode::Stick, t1)) {
                                *x = rest;
                                transitions.push(Transition { t: t1, from: *mode, to: ContactMode::Stick });
                                *mode = ContactMode::Stick;
                            }
                        }
                    }
                    return Ok(());
                }
                Some(tau) => {
                    let xe = self.rk4(x, *mode, t, tau);
                    let te = t + tau;
                    self.check(&xe, &self.at(&xe, *mode, te), te)?;
                    *x = xe;
                    let next = match *mode {
                        ContactMode::Stick => self.mode_at_rest(x, te),
                        ContactMode::Slip(_) => {
                            x[3] = 0.0;
                            self.mode_at_rest(x, te)
                        }
                    };
                    if next != *mode {
                        transitions.push(Transition { t: te, from: *mode, to: next });
                    }
                    *mode = next;
                    t = te;
                }
            }
        }
        Err(DynamicsError::Chattering(t))
    }

    fn row(&self, x: &[f64; 4], mode: ContactMode, t: f64) -> TraceRow {
        let e = self.at(x, mode, t);
        TraceRow { t, state: SimState::from_vector(*x, mode), demand: e.demand, f_s: self.p.mu * e.normal }
    }

    fn run(&self) -> Result<SimTrace, DynamicsError> {
        self.opts.validate()?;
        let dt = self.opts.dt;
        let steps = (self.opts.t_end / dt).round() as usize;
        let mut x = self.opts.init.vector();
        let mut mode = self.opts.init.mode;
        let mut trace = SimTrace::default();

        if mode == ContactMode::Stick {
            x[3] = 0.0;
            let m0 = self.mode_at_rest(&x, 0.0);
            if m0 != mode {
                trace.transitions.push(Transition { t: 0.0, from: mode, to: m0 });
                mode = m0;
            }
        }
        self.check(&x, &self.at(&x, mode, 0.0), 0.0)?;
        trace.rows.reserve(steps + 1);
        trace.rows.push(self.row(&x, mode, 0.0));
        for k in 0..steps {
            let (t0, t1) = (k as f64 * dt, (k + 1) as f64 * dt);
            self.advance(&mut x, &mut mode, t0, t1, &mut trace.transitions)?;
            trace.rows.push(self.row(&x, mode, t1));
        }
        Ok(trace)
    }
}

/// Slosh of a container held fixed on the tray. The friction margin is
/// still logged, but never acted upon.
pub fn simulate_pendulum(
    params: &PlantParams,
    motion: &(impl TrayMotion + ?Sized),
    init: (f64, f64),
    opts: &SimOptions,
) -> Result<SimTrace, DynamicsError> {
    params.validate()?;
    let opts = SimOptions {
        init: SimState { theta: init.0, theta_dot: init.1, ..SimState::rest() },
        ..*opts
    };
    Engine { model: Model::Pendulum, p: params, motion, opts }.run()
}

/// Pendulum slosh co-integrated with the stick/slip motion of the container.
pub fn simulate_coupled(
    params: &PlantParams,
    motion: &(impl TrayMotion + ?Sized),
    opts: &SimOptions,
) -> Result<SimTrace, DynamicsError> {
    params.validate()?;
    Engine { model: Model::Coupled, p: params, motion, opts: *opts }.run()
}

/// Stick/slip motion of a solid object of mass `M`; `m` is ignored.
pub fn simulate_solid_sliding(
    params: &PlantParams,
    motion: &(impl TrayMotion + ?Sized),
    opts: &SimOptions,
) -> Result<SimTrace, DynamicsError> {
    params.validate_solid()?;
    Engine { model: Model::Solid, p: params, motion, opts: *opts }.run()
}
