//! The four subcommands. Each reads the run configuration, does its work and
//! writes its outputs into the output directory.

use log::{info, warn};
use nalgebra::Vector2;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use waiter_core::compensation::{planar_tilt, CompensationError};
use waiter_core::dynamics::{
    simulate_coupled, simulate_solid_sliding, DynamicsError, MotionSample, SampledMotion, SimOptions, SimTrace,
};
use waiter_core::planner::{
    p2p_direction, p2p_trajectory, plan, CartesianTrajectory, Material, MotionKind, PlanResult, PlannerError,
};
use waiter_core::smoothers::{Cascade, CascadeSpec, SmootherKind};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::formats::{fmt_float, render_trace, write_atomic, PoseFile, TrajRow, TrajectoryFile};
use crate::noise::axis_noise;

/// Command-line inputs shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: PathBuf,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done,
    Pass,
    Fail(String),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Done | Outcome::Pass => 0,
            Outcome::Fail(_) => 1,
        }
    }
}

struct Context {
    cfg: RunConfig,
    input: Option<PathBuf>,
    out: PathBuf,
}

impl Context {
    fn load(inv: &Invocation) -> Result<Self, CliError> {
        let mut cfg = RunConfig::load(&inv.config)?;
        if let Some(dt) = inv.dt {
            cfg.numerics.dt = dt;
        }
        if let Some(seed) = inv.seed {
            cfg.numerics.seed = seed;
        }
        cfg.validate()?;
        let out = inv.output.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
        Ok(Context { cfg, input: inv.input.clone(), out })
    }

    fn write(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        write_atomic(&path, text.as_bytes())?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn input(&self) -> Result<&Path, CliError> {
        self.input.as_deref().ok_or_else(|| CliError::config("--input", "this command needs an input trajectory"))
    }
}

fn planner_err(e: PlannerError) -> CliError {
    match e {
        PlannerError::Config { field, msg } => CliError::config(format!("scenario.{field}"), msg),
        other => CliError::Runtime(other.to_string()),
    }
}

fn free_fall(t: f64, e: CompensationError) -> CliError {
    CliError::Runtime(format!("compensation failed at t = {t} s: {e}"))
}

pub fn describe(kind: &SmootherKind) -> String {
    match *kind {
        SmootherKind::Rectangular { t } => format!("rectangular T={t}"),
        SmootherKind::Harmonic { t } => format!("harmonic T={t}"),
        SmootherKind::Trapezoidal { t1, t2 } if t1 == t2 => format!("triangular T1=T2={t1}"),
        SmootherKind::Trapezoidal { t1, t2 } => format!("trapezoidal T1={t1} T2={t2}"),
        SmootherKind::DampedHarmonic { sigma, t } => format!("damped_harmonic sigma={sigma} T={t}"),
    }
}

fn plan_report(cfg: &RunConfig, p: &PlanResult) -> String {
    let s = &cfg.scenario;
    let mut r = String::new();
    let _ = writeln!(r, "material: {:?}", s.material);
    let _ = writeln!(r, "motion: {:?}", s.motion);
    if p.cascade.stages.is_empty() {
        let _ = writeln!(r, "cascade: empty (goal equals start)");
    }
    for (i, k) in p.cascade.stages.iter().enumerate() {
        let _ = writeln!(r, "stage {}: {}", i + 1, describe(k));
    }
    if let Some(t) = p.free_t {
        let _ = writeln!(r, "free triangular time constant: {t} s");
    }
    let _ = writeln!(r, "output continuity: C^{}", p.output_class);
    let _ = writeln!(r, "continuous jerk: {}", if p.continuous_jerk { "yes" } else { "no" });
    let _ = write!(r, "{}", p.report);
    r
}

fn reference_file(traj: &CartesianTrajectory, t0: f64) -> TrajectoryFile {
    let rows = (0..traj.len())
        .map(|k| {
            let p = traj.position(k);
            let a = traj.acceleration(k);
            TrajRow { t: t0 + k as f64 * traj.dt, p: [p.x, p.y, p.z], a: Some([a.x, a.y, a.z]) }
        })
        .collect();
    TrajectoryFile { dt: traj.dt, units: "m".into(), rows }
}

fn pose_file(cfg: &RunConfig, traj: &CartesianTrajectory, t0: f64) -> Result<PoseFile, CliError> {
    let s = &cfg.scenario;
    let mount = s.mounting_transform().map_err(planner_err)?;
    let poses = traj.flange_poses(&mount, s.g, s.tilt).map_err(|(t, e)| free_fall(t0 + t, e))?;
    let rows = poses.into_iter().enumerate().map(|(k, m)| (t0 + k as f64 * traj.dt, m)).collect();
    Ok(PoseFile { dt: traj.dt, rows })
}

/// Plans a point-to-point motion and writes `plan.json`, `report.txt`, the
/// flange poses (`trajectory.csv`) and the CoR reference (`reference.csv`).
pub fn cmd_plan(inv: &Invocation) -> Result<Outcome, CliError> {
    let ctx = Context::load(inv)?;
    let cfg = &ctx.cfg;
    if cfg.scenario.motion != MotionKind::PointToPoint {
        return Err(CliError::config("scenario.motion", "plan needs a point_to_point scenario; use filter for complex references"));
    }
    let p = plan(&cfg.scenario).map_err(planner_err)?;
    info!("planned duration {} s with {} stages", p.duration, p.cascade.stages.len());
    if p.report.meets_floor == Some(false) {
        warn!("planned duration is below the friction floor");
    }
    let traj = p2p_trajectory(&cfg.scenario, &p, cfg.numerics.dt, cfg.numerics.tail).map_err(planner_err)?;
    let poses = pose_file(cfg, &traj, 0.0)?;

    let json = serde_json::to_string_pretty(&p).map_err(|e| CliError::Runtime(e.to_string()))?;
    ctx.write("plan.json", &(json + "\n"))?;
    ctx.write("report.txt", &plan_report(cfg, &p))?;
    ctx.write("trajectory.csv", &poses.render()?)?;
    ctx.write("reference.csv", &reference_file(&traj, 0.0).render()?)?;
    Ok(Outcome::Done)
}

/// Streams a recorded reference through the planned cascade, holding the
/// last sample until the filters settle, and writes the filtered CoR motion
/// (`filtered.csv`), flange poses (`trajectory.csv`) and `report.txt`.
pub fn cmd_filter(inv: &Invocation) -> Result<Outcome, CliError> {
    let ctx = Context::load(inv)?;
    let cfg = &ctx.cfg;
    if cfg.scenario.motion != MotionKind::Complex {
        return Err(CliError::config("scenario.motion", "filter needs a complex scenario"));
    }
    let input = TrajectoryFile::read(ctx.input()?)?;
    let dt = input.dt;
    if inv.dt.is_some_and(|d| (d - dt).abs() > 1e-12 * dt) {
        return Err(CliError::config("--dt", format!("filter runs at the input sample period {dt} s")));
    }
    let p = plan(&cfg.scenario).map_err(planner_err)?;
    let spec: &CascadeSpec = &p.cascade;
    let mk = || Cascade::new(spec, dt).map_err(|e| CliError::Runtime(e.to_string()));
    let mut axes = [mk()?, mk()?, mk()?];

    let noise = cfg.numerics.noise.as_ref().map(|n| axis_noise(n, cfg.numerics.seed));
    let t0 = input.rows[0].t;
    let delay_n = (spec.quantized_support(dt) / dt).round() as usize;
    let last = input.rows.len() - 1;
    let mut samples = Vec::with_capacity(input.rows.len() + delay_n);
    for k in 0..=last + delay_n {
        let row = &input.rows[k.min(last)];
        let t = t0 + k.min(last) as f64 * dt;
        let s = std::array::from_fn(|i| {
            let n = noise.as_ref().map_or(0.0, |n| n[i].value(t - t0));
            axes[i].step(row.p[i] + n)
        });
        samples.push(s);
    }
    let traj = CartesianTrajectory { dt, samples };
    let poses = pose_file(cfg, &traj, t0)?;
    let delay = delay_n as f64 * dt;

    let mut r = String::new();
    for (i, k) in spec.stages.iter().enumerate() {
        let _ = writeln!(r, "stage {}: {}", i + 1, describe(k));
    }
    let _ = writeln!(r, "input samples: {}", input.rows.len());
    let _ = writeln!(r, "sample period: {dt} s");
    let _ = writeln!(r, "delay: {delay} s ({delay_n} samples, kernel support {} s)", spec.support());
    if let Some(n) = &cfg.numerics.noise {
        let _ = writeln!(r, "injected noise: rms {} m, band {:?} rad/s, seed {}", n.amplitude, n.band, cfg.numerics.seed);
    }
    info!("filter delay {delay} s");
    ctx.write("filtered.csv", &reference_file(&traj, t0).render()?)?;
    ctx.write("trajectory.csv", &poses.render()?)?;
    ctx.write("report.txt", &r)?;
    Ok(Outcome::Done)
}

fn horizontal_of(file: &TrajectoryFile) -> Vector2<f64> {
    let (a, b) = (&file.rows[0].p, &file.rows[file.rows.len() - 1].p);
    let d = Vector2::new(b[0] - a[0], b[1] - a[1]);
    if d.norm() > 0.0 {
        d.normalize()
    } else {
        Vector2::x()
    }
}

/// Tray motion from a trajectory file with accelerations, on a grid twice
/// as fine as the file so that every Runge-Kutta stage hits a sample. The
/// compensating tilt is recomputed from the accelerations, its rates by
/// central differences.
fn motion_from_file(file: &TrajectoryFile, g: f64, tilt: bool) -> Result<SampledMotion, CliError> {
    if !file.has_accel() {
        return Err(CliError::config("--input", "simulation input needs acceleration columns"));
    }
    let u = horizontal_of(file);
    let n = file.rows.len();
    let dt = file.dt;
    let proj = |r: &TrajRow| {
        let a = r.a.unwrap();
        (u.x * r.p[0] + u.y * r.p[1], r.p[2], u.x * a[0] + u.y * a[1], a[2])
    };
    let base: Vec<_> = file.rows.iter().map(proj).collect();
    let m = 2 * n - 1;
    let h = dt / 2.0;
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let (k, odd) = (j / 2, j % 2 == 1);
        let (x, z, ax, az) = if odd {
            let (a, b) = (base[k], base[k + 1]);
            (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1), 0.5 * (a.2 + b.2), 0.5 * (a.3 + b.3))
        } else {
            base[k]
        };
        let (vx, vz) = if odd {
            ((base[k + 1].0 - base[k].0) / dt, (base[k + 1].1 - base[k].1) / dt)
        } else {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
            let span = (hi - lo).max(1) as f64 * dt;
            ((base[hi].0 - base[lo].0) / span, (base[hi].1 - base[lo].1) / span)
        };
        let beta = if tilt {
            planar_tilt(ax, az, g).map_err(|e| free_fall(file.rows[0].t + j as f64 * h, e))?
        } else {
            0.0
        };
        out.push(MotionSample { x, z, vx, vz, ax, az, beta, beta_dot: 0.0, beta_ddot: 0.0 });
    }
    let betas: Vec<f64> = out.iter().map(|s| s.beta).collect();
    for j in 0..m {
        let prev = betas[j.saturating_sub(1)];
        let next = betas[(j + 1).min(m - 1)];
        out[j].beta_dot = (next - prev) / (2.0 * h);
        out[j].beta_ddot = (next - 2.0 * betas[j] + prev) / (h * h);
    }
    Ok(SampledMotion::new(h, out))
}

fn verdict_text(lines: &[(&str, String)]) -> String {
    lines.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
}

/// Runs the planar simulator on the planned motion, or on `--input`, and
/// writes `simtrace.csv` and `verdict.txt`.
pub fn cmd_simulate(inv: &Invocation) -> Result<Outcome, CliError> {
    let ctx = Context::load(inv)?;
    let cfg = &ctx.cfg;
    let plant = *cfg.plant()?;
    let s = &cfg.scenario;
    let (motion, dt) = match &ctx.input {
        Some(path) => {
            let file = TrajectoryFile::read(path)?;
            let dt = file.dt;
            (motion_from_file(&file, s.g, s.tilt)?, dt)
        }
        None => {
            if s.motion != MotionKind::PointToPoint {
                return Err(CliError::config("--input", "complex scenarios are simulated from a trajectory file"));
            }
            let dt = cfg.numerics.dt;
            let p = plan(s).map_err(planner_err)?;
            let traj = p2p_trajectory(s, &p, dt / 2.0, cfg.numerics.tail).map_err(planner_err)?;
            let motion =
                traj.planar_motion(p2p_direction(s), s.g, s.tilt).map_err(|e| CliError::Runtime(e.to_string()))?;
            (motion, dt)
        }
    };
    let solid = s.material == Material::Solid || plant.m == 0.0;
    let model = if solid { "solid" } else { "coupled" };
    let opts = SimOptions {
        v_eps: cfg.numerics.v_eps,
        event_tol: cfg.numerics.event_tol,
        ..SimOptions::new(dt, motion.duration())
    };
    info!("simulating {model} model for {} s at dt = {dt} s", motion.duration());
    let result = if solid {
        simulate_solid_sliding(&plant, &motion, &opts)
    } else {
        simulate_coupled(&plant, &motion, &opts)
    };
    let trace: SimTrace = match result {
        Ok(t) => t,
        Err(DynamicsError::ContactLost { t, normal }) => {
            let reason = format!("contact lost at t = {t} s (normal force {normal} N)");
            ctx.write("verdict.txt", &verdict_text(&[("verdict", "FAIL".into()), ("model", model.into()), ("reason", reason.clone())]))?;
            return Ok(Outcome::Fail(reason));
        }
        Err(DynamicsError::Params(m)) => return Err(CliError::config("plant", m)),
        Err(e) => return Err(CliError::Runtime(e.to_string())),
    };

    let th = &cfg.thresholds;
    let max_theta = trace.max_abs_theta();
    let slip = trace.max_excursion();
    let mut reasons = Vec::new();
    if !solid && max_theta > th.max_theta {
        reasons.push(format!("max |theta| {max_theta} rad exceeds {}", th.max_theta));
    }
    if slip > th.max_slip {
        reasons.push(format!("slip distance {slip} m exceeds {}", th.max_slip));
    }
    let verdict = if reasons.is_empty() { "PASS" } else { "FAIL" };
    let mut lines = vec![
        ("verdict", verdict.to_string()),
        ("model", model.to_string()),
        ("max_abs_theta", fmt_float(max_theta)),
        ("max_slip", fmt_float(slip)),
        ("final_displacement", fmt_float(trace.final_displacement())),
        ("transitions", trace.transitions.len().to_string()),
        ("threshold_theta", fmt_float(th.max_theta)),
        ("threshold_slip", fmt_float(th.max_slip)),
    ];
    if let Some(t) = trace.first_violation() {
        lines.push(("first_friction_violation", fmt_float(t)));
    }
    for r in &reasons {
        lines.push(("reason", r.clone()));
    }
    ctx.write("simtrace.csv", &render_trace(&trace, dt, model)?)?;
    ctx.write("verdict.txt", &verdict_text(&lines))?;
    info!("verdict {verdict}");
    Ok(if reasons.is_empty() { Outcome::Pass } else { Outcome::Fail(reasons.join("; ")) })
}

fn frequency_grid(cfg: &RunConfig, stages: &[SmootherKind]) -> Vec<f64> {
    let spec = cfg.freqresp.as_ref();
    if let Some(w) = spec.and_then(|f| f.omegas.clone()) {
        return w;
    }
    let points = spec.map_or(501, |f| f.points);
    let omega_max = spec.and_then(|f| f.omega_max).unwrap_or_else(|| {
        // ten times the highest kernel frequency
        let shortest = stages.iter().map(|k| k.support()).fold(f64::INFINITY, f64::min);
        10.0 * 2.0 * std::f64::consts::PI / shortest
    });
    (0..points).map(|i| omega_max * i as f64 / (points - 1) as f64).collect()
}

/// Writes `freqresp.csv`: the magnitude response of every configured
/// smoother, or of every planned stage and of the whole cascade.
pub fn cmd_freqresp(inv: &Invocation) -> Result<Outcome, CliError> {
    let ctx = Context::load(inv)?;
    let cfg = &ctx.cfg;
    let configured = cfg.freqresp.as_ref().map(|f| f.smoothers.clone()).unwrap_or_default();
    let planned = configured.is_empty();
    let stages = if planned { plan(&cfg.scenario).map_err(planner_err)?.cascade.stages } else { configured };
    if stages.is_empty() {
        return Err(CliError::config("freqresp.smoothers", "nothing to evaluate: the planned cascade is empty"));
    }
    let grid = frequency_grid(cfg, &stages);
    let columns: Vec<Vec<f64>> = stages.iter().map(|k| CascadeSpec::new(vec![*k]).freq_response(&grid)).collect();
    let product = (planned && stages.len() > 1).then(|| CascadeSpec::new(stages.clone()).freq_response(&grid));

    let mut header = vec!["omega[rad/s]".to_string()];
    header.extend((1..=stages.len()).map(|i| format!("h{i}[-]")));
    if product.is_some() {
        header.push("cascade[-]".into());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(|e| CliError::Runtime(e.to_string()))?;
    for (i, om) in grid.iter().enumerate() {
        let mut rec = vec![fmt_float(*om)];
        rec.extend(columns.iter().map(|c| fmt_float(c[i])));
        if let Some(p) = &product {
            rec.push(fmt_float(p[i]));
        }
        w.write_record(&rec).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?).unwrap();
    let labels: Vec<String> =
        stages.iter().enumerate().map(|(i, k)| format!("h{}={}", i + 1, describe(k).replace(' ', ":"))).collect();
    let text = format!("# waiter-freqresp {}\n{body}", labels.join(" "));
    ctx.write("freqresp.csv", &text)?;
    Ok(Outcome::Done)
}
