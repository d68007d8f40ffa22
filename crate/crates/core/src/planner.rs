//! Scenario-level planning: which smoother cascade to use for a given
//! material and motion type, friction-limited durations, and generation of
//! the planned Cartesian trajectory.

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::compensation::{
    compose_flange_pose, pendulum_length_from_frequency, planar_tilt_rates, rotation_matrix, tilt_angles,
    CartesianAccel, CompensationError, MountingTransform,
};
use crate::dynamics::{MotionSample, SampledMotion};
use crate::smoothers::{
    make_damped_harmonic_params, make_trapezoidal_params, samples_for, Cascade, CascadeSpec, Jet, SmootherError,
    SmootherKind,
};
use crate::GRAVITY;

/// Smallest free triangular time constant the planner will pick on its own.
pub const MIN_FREE_T: f64 = 0.05;
/// Sample period used when searching the free time constant.
const SEARCH_DT: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("{field}: {msg}")]
    Config { field: String, msg: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Smoother(#[from] SmootherError),
    #[error(transparent)]
    Compensation(#[from] CompensationError),
}

fn config_err(field: &str, msg: impl Into<String>) -> PlannerError {
    PlannerError::Config { field: field.into(), msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Solid,
    Liquid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    PointToPoint,
    Complex,
}

/// First slosh mode of the liquid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SloshParams {
    pub omega_n: f64,
    pub delta: f64,
}

/// Where the object sits on the flange. `offset` is the CoM of a solid, or
/// the free-surface point of a liquid (the CoR then lies one pendulum length
/// below it along the container axis).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mounting {
    /// Roll, pitch, yaw of the object frame in the flange frame.
    #[serde(default)]
    pub rpy: [f64; 3],
    #[serde(default)]
    pub offset: [f64; 3],
}

fn default_cap() -> f64 {
    100.0
}
fn default_gravity() -> f64 {
    GRAVITY
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub material: Material,
    pub motion: MotionKind,
    #[serde(default)]
    pub start: [f64; 3],
    pub goal: Option<[f64; 3]>,
    pub v_max: Option<f64>,
    pub a_max: Option<f64>,
    pub slosh: Option<SloshParams>,
    /// Free triangular time constant; searched when absent.
    pub free_t: Option<f64>,
    /// Angular acceleration cap for the free-stage search, rad/s².
    #[serde(default = "default_cap")]
    pub beta_ddot_cap: f64,
    #[serde(default = "default_true")]
    pub tilt: bool,
    #[serde(default)]
    pub mounting: Mounting,
    /// Friction coefficient used by the feasibility report.
    pub mu: Option<f64>,
    /// Vertical offset between the CoR and the object's center of mass.
    #[serde(default)]
    pub d_z: f64,
    #[serde(default = "default_gravity")]
    pub g: f64,
}

impl Scenario {
    pub fn point_to_point(material: Material, start: [f64; 3], goal: [f64; 3], v_max: f64, a_max: f64) -> Self {
        Scenario {
            material,
            motion: MotionKind::PointToPoint,
            start,
            goal: Some(goal),
            v_max: Some(v_max),
            a_max: Some(a_max),
            slosh: None,
            free_t: None,
            beta_ddot_cap: default_cap(),
            tilt: true,
            mounting: Mounting::default(),
            mu: None,
            d_z: 0.0,
            g: GRAVITY,
        }
    }

    pub fn complex(material: Material) -> Self {
        Scenario {
            motion: MotionKind::Complex,
            goal: None,
            v_max: None,
            a_max: None,
            ..Self::point_to_point(material, [0.0; 3], [0.0; 3], 1.0, 1.0)
        }
    }

    /// Checks cross-field consistency; errors carry the offending field.
    pub fn validate(&self) -> Result<(), PlannerError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.g) {
            return Err(config_err("g", "must be positive"));
        }
        if self.start.iter().any(|v| !v.is_finite()) {
            return Err(config_err("start", "must be finite"));
        }
        if self.material == Material::Liquid {
            let s = self.slosh.ok_or_else(|| config_err("slosh", "liquid scenarios need omega_n and delta"))?;
            if !positive(s.omega_n) {
                return Err(config_err("slosh.omega_n", "must be positive"));
            }
            if !(0.0..1.0).contains(&s.delta) {
                return Err(config_err("slosh.delta", "must satisfy 0 <= delta < 1"));
            }
        }
        if self.motion == MotionKind::PointToPoint {
            let goal = self.goal.ok_or_else(|| config_err("goal", "point-to-point scenarios need a goal"))?;
            if goal.iter().any(|v| !v.is_finite()) {
                return Err(config_err("goal", "must be finite"));
            }
            match self.v_max {
                Some(v) if positive(v) => {}
                _ => return Err(config_err("v_max", "point-to-point scenarios need a positive v_max")),
            }
            match self.a_max {
                Some(a) if positive(a) => {}
                _ => return Err(config_err("a_max", "point-to-point scenarios need a positive a_max")),
            }
        }
        if let Some(t) = self.free_t {
            if !positive(t) {
                return Err(config_err("free_t", "must be positive"));
            }
        }
        if !positive(self.beta_ddot_cap) {
            return Err(config_err("beta_ddot_cap", "must be positive"));
        }
        if let Some(mu) = self.mu {
            if !(mu.is_finite() && mu >= 0.0) {
                return Err(config_err("mu", "must be non-negative"));
            }
        }
        if !self.d_z.is_finite() {
            return Err(config_err("d_z", "must be finite"));
        }
        if self.mounting.rpy.iter().chain(&self.mounting.offset).any(|v| !v.is_finite()) {
            return Err(config_err("mounting", "must be finite"));
        }
        Ok(())
    }

    fn displacement(&self) -> Vector3<f64> {
        let goal = self.goal.unwrap_or(self.start);
        Vector3::from(goal) - Vector3::from(self.start)
    }

    /// Flange-to-CoR transform per material.
    pub fn mounting_transform(&self) -> Result<MountingTransform, PlannerError> {
        let [r, p, y] = self.mounting.rpy;
        let rot: Matrix3<f64> = Rotation3::from_euler_angles(r, p, y).into_inner();
        let offset = Vector3::from(self.mounting.offset);
        let mount = match (self.material, self.slosh) {
            (Material::Liquid, Some(s)) => {
                MountingTransform::liquid(rot, offset, pendulum_length_from_frequency(s.omega_n, self.g)?)?
            }
            _ => MountingTransform::solid(rot, offset)?,
        };
        Ok(mount)
    }
}

/// Peak acceleration of the triangular (bang-bang) motion of length `h`
/// completed in `t`.
pub fn triangular_min_acc(h: f64, t: f64) -> Result<f64, PlannerError> {
    if !(h > 0.0 && t > 0.0) {
        return Err(PlannerError::Domain(format!("h and T must be positive, got h={h}, T={t}")));
    }
    Ok(4.0 * h / (t * t))
}

/// Shortest duration of a motion of length `h` under `|a| <= a_max`.
pub fn min_time(h: f64, a_max: f64) -> Result<f64, PlannerError> {
    if !(h > 0.0 && a_max > 0.0) {
        return Err(PlannerError::Domain(format!("h and a_max must be positive, got h={h}, a_max={a_max}")));
    }
    Ok(2.0 * (h / a_max).sqrt())
}

/// Shortest duration for which an untilted tray can carry an object over a
/// horizontal distance `h_o` and vertical distance `h_v` without slipping,
/// assuming the worst-case vertical acceleration `-4 h_v / T^2`.
pub fn friction_limited_duration(h_o: f64, h_v: f64, mu: f64, g: f64) -> Result<f64, PlannerError> {
    if !(h_o >= 0.0 && h_v >= 0.0 && mu >= 0.0 && g > 0.0) || !(h_o + h_v + mu + g).is_finite() {
        return Err(PlannerError::Domain(format!(
            "need h_o, h_v, mu >= 0 and g > 0, got h_o={h_o}, h_v={h_v}, mu={mu}, g={g}"
        )));
    }
    if h_o == 0.0 {
        return Ok(2.0 * (h_v / g).sqrt());
    }
    if mu == 0.0 {
        return Err(PlannerError::Infeasible(
            "without friction no horizontal motion is possible on an untilted tray".into(),
        ));
    }
    Ok(2.0 * ((h_o + mu * h_v) / (mu * g)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub tilt_enabled: bool,
    /// Friction-limited lower bound on the duration, when one applies.
    pub friction_floor: Option<f64>,
    pub duration: Option<f64>,
    pub meets_floor: Option<bool>,
    pub notes: Vec<String>,
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tilt compensation: {}", if self.tilt_enabled { "on" } else { "off" })?;
        match self.friction_floor {
            Some(t) => writeln!(f, "friction floor T*: {t} s")?,
            None => writeln!(f, "friction floor T*: none")?,
        }
        if let Some(d) = self.duration {
            writeln!(f, "planned duration: {d} s")?;
        }
        if let Some(ok) = self.meets_floor {
            writeln!(f, "duration meets floor: {}", if ok { "yes" } else { "NO" })?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

pub fn feasibility_report(scenario: &Scenario, tilt_enabled: bool) -> FeasibilityReport {
    let mut notes = Vec::new();
    let mut floor = None;
    if tilt_enabled {
        if scenario.d_z == 0.0 {
            notes.push("CoR at the center of mass: unbounded by friction; duration limited only by v_max, a_max and the free angular time constants".into());
        } else {
            notes.push(format!(
                "CoR offset d_z = {} m: the object stays put only while |d_z M beta''| <= F_s",
                scenario.d_z
            ));
        }
    } else {
        match (scenario.motion, scenario.mu) {
            (MotionKind::Complex, _) => notes.push("friction floor not evaluated for complex references".into()),
            (_, None) => notes.push("no friction coefficient given; friction floor not evaluated".into()),
            (MotionKind::PointToPoint, Some(mu)) => {
                let d = scenario.displacement();
                let (h_o, h_v) = (d.xy().norm(), d.z.abs());
                match friction_limited_duration(h_o, h_v, mu, scenario.g) {
                    Ok(t) => {
                        floor = Some(t);
                        notes.push(format!(
                            "floor assumes triangular motion with worst-case vertical acceleration -4 h_v / T^2 (h_o = {h_o} m, h_v = {h_v} m)"
                        ));
                    }
                    Err(e) => {
                        floor = Some(f64::INFINITY);
                        notes.push(e.to_string());
                    }
                }
            }
        }
    }
    FeasibilityReport { tilt_enabled, friction_floor: floor, duration: None, meets_floor: None, notes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub cascade: CascadeSpec,
    /// Sum of the kernel supports, i.e. the motion duration for a step goal.
    pub duration: f64,
    /// Continuity class of the planned position.
    pub output_class: i32,
    /// Whether the planned motion has a continuous jerk, which bounded tilt
    /// accelerations require.
    pub continuous_jerk: bool,
    pub free_t: Option<f64>,
    pub report: FeasibilityReport,
}

fn input_class(motion: MotionKind) -> i32 {
    match motion {
        MotionKind::PointToPoint => -1,
        // smooth references (splines, teleoperation) are assumed C²
        MotionKind::Complex => 2,
    }
}

pub fn plan(scenario: &Scenario) -> Result<PlanResult, PlannerError> {
    scenario.validate()?;
    let mut free_t = None;
    let h = scenario.displacement().norm();
    let stages = match (scenario.material, scenario.motion) {
        (_, MotionKind::PointToPoint) if h == 0.0 => vec![],
        (Material::Solid, MotionKind::PointToPoint) => {
            let (t1, t2) = make_trapezoidal_params(h, scenario.v_max.unwrap(), scenario.a_max.unwrap())?;
            let base = SmootherKind::Trapezoidal { t1, t2 };
            let t = match scenario.free_t {
                Some(t) => t,
                None => search_free_t(scenario, base)?,
            };
            free_t = Some(t);
            vec![base, SmootherKind::triangular(t)]
        }
        (Material::Liquid, MotionKind::PointToPoint) => {
            let (t1, t2) = make_trapezoidal_params(h, scenario.v_max.unwrap(), scenario.a_max.unwrap())?;
            let s = scenario.slosh.unwrap();
            let (sigma, t) = make_damped_harmonic_params(s.omega_n, s.delta)?;
            vec![SmootherKind::Trapezoidal { t1, t2 }, SmootherKind::DampedHarmonic { sigma, t }]
        }
        (Material::Solid, MotionKind::Complex) => {
            let t = scenario.free_t.unwrap_or(MIN_FREE_T);
            free_t = Some(t);
            vec![SmootherKind::triangular(t)]
        }
        (Material::Liquid, MotionKind::Complex) => {
            let s = scenario.slosh.unwrap();
            let (sigma, t) = make_damped_harmonic_params(s.omega_n, s.delta)?;
            vec![SmootherKind::DampedHarmonic { sigma, t }]
        }
    };
    let cascade = CascadeSpec::new(stages);
    let duration = cascade.support();
    let output_class = cascade.output_class(input_class(scenario.motion));
    let mut report = feasibility_report(scenario, scenario.tilt);
    report.duration = Some(duration);
    report.meets_floor = report.friction_floor.map(|f| duration >= f);
    Ok(PlanResult {
        cascade,
        duration,
        output_class,
        continuous_jerk: output_class >= 3 || cascade_is_empty_p2p(scenario, h),
        free_t,
        report,
    })
}

fn cascade_is_empty_p2p(scenario: &Scenario, h: f64) -> bool {
    scenario.motion == MotionKind::PointToPoint && h == 0.0
}

/// Peak |beta''| of the compensating tilt along a point-to-point plan.
fn peak_tilt_acceleration(scenario: &Scenario, stages: Vec<SmootherKind>) -> Result<f64, PlannerError> {
    let spec = CascadeSpec::new(stages);
    let traj = p2p_from_spec(scenario, &spec, SEARCH_DT, 0.0)?;
    let dir = horizontal_direction(scenario);
    let mut peak: f64 = 0.0;
    for s in &traj.samples {
        let x = s[0].scaled(dir.x) + s[1].scaled(dir.y);
        let rates = planar_tilt_rates(&x, &s[2], scenario.g)?;
        peak = peak.max(rates[2].abs());
    }
    Ok(peak)
}

/// Smallest free triangular time constant (not below [`MIN_FREE_T`]) that
/// keeps the compensating tilt acceleration under the scenario's cap.
fn search_free_t(scenario: &Scenario, base: SmootherKind) -> Result<f64, PlannerError> {
    let cap = scenario.beta_ddot_cap;
    let peak = |t: f64| peak_tilt_acceleration(scenario, vec![base, SmootherKind::triangular(t)]);
    if peak(MIN_FREE_T)? <= cap {
        return Ok(MIN_FREE_T);
    }
    let mut lo = MIN_FREE_T;
    let mut hi = 2.0 * MIN_FREE_T;
    while peak(hi)? > cap {
        lo = hi;
        hi *= 2.0;
        if hi > 60.0 {
            return Err(PlannerError::Infeasible(format!(
                "no free time constant below 60 s keeps |beta''| under {cap} rad/s^2"
            )));
        }
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if peak(mid)? <= cap {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn horizontal_direction(scenario: &Scenario) -> Vector2<f64> {
    let d = scenario.displacement().xy();
    let n = d.norm();
    if n > 0.0 {
        d / n
    } else {
        Vector2::x()
    }
}

/// Position, velocity, acceleration, jerk and snap of each Cartesian axis on
/// a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianTrajectory {
    pub dt: f64,
    pub samples: Vec<[Jet; 3]>,
}

impl CartesianTrajectory {
    pub fn position(&self, k: usize) -> Vector3<f64> {
        let s = &self.samples[k];
        Vector3::new(s[0].pos(), s[1].pos(), s[2].pos())
    }

    pub fn acceleration(&self, k: usize) -> Vector3<f64> {
        let s = &self.samples[k];
        Vector3::new(s[0].acc(), s[1].acc(), s[2].acc())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Projection on the vertical plane through `horizontal`, as tray motion
    /// for the planar simulator. With `tilt` the compensating tilt and its
    /// rates are filled in from the acceleration derivatives.
    pub fn planar_motion(&self, horizontal: Vector2<f64>, g: f64, tilt: bool) -> Result<SampledMotion, CompensationError> {
        let mut out = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            let x = s[0].scaled(horizontal.x) + s[1].scaled(horizontal.y);
            let z = s[2];
            let [beta, beta_dot, beta_ddot] = if tilt { planar_tilt_rates(&x, &z, g)? } else { [0.0; 3] };
            out.push(MotionSample {
                x: x.pos(),
                z: z.pos(),
                vx: x.vel(),
                vz: z.vel(),
                ax: x.acc(),
                az: z.acc(),
                beta,
                beta_dot,
                beta_ddot,
            });
        }
        Ok(SampledMotion::new(self.dt, out))
    }

    /// Flange poses along the trajectory. The error carries the sample time.
    pub fn flange_poses(
        &self,
        mount: &MountingTransform,
        g: f64,
        tilt: bool,
    ) -> Result<Vec<Matrix4<f64>>, (f64, CompensationError)> {
        (0..self.len())
            .map(|k| {
                let t = k as f64 * self.dt;
                let a = self.acceleration(k);
                let r = if tilt {
                    let (beta, phi) = tilt_angles(CartesianAccel::new(a.x, a.y, a.z), g).map_err(|e| (t, e))?;
                    rotation_matrix(beta, phi)
                } else {
                    Matrix3::identity()
                };
                compose_flange_pose(&self.position(k), &r, mount).map_err(|e| (t, e))
            })
            .collect()
    }
}

fn p2p_from_spec(scenario: &Scenario, spec: &CascadeSpec, dt: f64, tail: f64) -> Result<CartesianTrajectory, PlannerError> {
    let d = scenario.displacement();
    let h = d.norm();
    let start = Vector3::from(scenario.start);
    let tail_n = if tail > 0.0 { samples_for(tail, dt) } else { 0 };
    let rest = |p: &Vector3<f64>| [Jet::constant(p.x), Jet::constant(p.y), Jet::constant(p.z)];
    if spec.stages.is_empty() || h == 0.0 {
        return Ok(CartesianTrajectory { dt, samples: vec![rest(&start); 1 + tail_n] });
    }
    let u = d / h;
    let mut cascade = Cascade::new(spec, dt)?;
    // the step is taken between the first two samples
    let n = (spec.quantized_support(dt) / dt).round() as usize + 2 + tail_n;
    let samples = (0..n)
        .map(|k| {
            let s = cascade.step(if k == 0 { 0.0 } else { h });
            std::array::from_fn(|i| {
                let mut j = s.scaled(u[i]);
                j.0[0] += start[i];
                j
            })
        })
        .collect();
    Ok(CartesianTrajectory { dt, samples })
}

/// Samples the planned point-to-point motion of the CoR, followed by `tail`
/// seconds at the goal. The path is the straight segment from start to goal.
pub fn p2p_trajectory(
    scenario: &Scenario,
    plan: &PlanResult,
    dt: f64,
    tail: f64,
) -> Result<CartesianTrajectory, PlannerError> {
    if scenario.motion != MotionKind::PointToPoint {
        return Err(config_err("motion", "trajectory generation needs a point-to-point scenario"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(PlannerError::Domain(format!("dt must be positive, got {dt}")));
    }
    p2p_from_spec(scenario, &plan.cascade, dt, tail)
}

/// Unit horizontal direction of a point-to-point scenario (x when vertical).
pub fn p2p_direction(scenario: &Scenario) -> Vector2<f64> {
    horizontal_direction(scenario)
}
