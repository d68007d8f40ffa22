//! Text file formats: a `# waiter-<kind> key=value ...` line, a CSV header
//! with units in brackets, then one CSV row per sample. Floats are written in
//! the shortest form that parses back to the same value.

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use waiter_core::dynamics::{ContactMode, SimState, SimTrace, TraceRow};

use crate::error::CliError;

const TRAJ_COLUMNS: [&str; 4] = ["t[s]", "x[m]", "y[m]", "z[m]"];
const ACC_COLUMNS: [&str; 3] = ["ax[m/s^2]", "ay[m/s^2]", "az[m/s^2]"];
const POSE_COLUMNS: [&str; 17] = [
    "t[s]", "x[m]", "y[m]", "z[m]", "qw[-]", "qx[-]", "qy[-]", "qz[-]", "r11[-]", "r12[-]", "r13[-]", "r21[-]",
    "r22[-]", "r23[-]", "r31[-]", "r32[-]", "r33[-]",
];
const TRACE_COLUMNS: [&str; 8] = [
    "t[s]", "theta[rad]", "theta_dot[rad/s]", "d_x[m]", "d_x_dot[m/s]", "mode[-]", "demand[N]", "f_s[N]",
];

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Runtime(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Shortest decimal that parses back to `v`; scientific notation for very
/// small or very large magnitudes.
pub fn fmt_float(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn fmt(v: f64) -> String {
    fmt_float(v)
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn render(preamble: &str, columns: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).map_err(|e| CliError::Runtime(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut out = String::from(preamble);
    out.push('\n');
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

struct Parsed {
    meta: BTreeMap<String, String>,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn parse(text: &str, kind: &str) -> Result<Parsed, CliError> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let tag = format!("# waiter-{kind}");
    let meta_text = first
        .trim_end()
        .strip_prefix(&tag)
        .ok_or_else(|| bad(format!("expected a '{tag}' header line")))?;
    let mut meta = BTreeMap::new();
    for tok in meta_text.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| bad(format!("malformed header token '{tok}'")))?;
        meta.insert(k.to_string(), v.to_string());
    }
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        let vals = rec
            .iter()
            .map(|s| {
                let v: f64 = s.trim().parse().map_err(|_| bad(format!("row {}: '{s}' is not a number", i + 1)))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(bad(format!("row {}: non-finite value", i + 1)))
                }
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        rows.push(vals);
    }
    Ok(Parsed { meta, columns, rows })
}

fn meta_dt(meta: &BTreeMap<String, String>) -> Result<f64, CliError> {
    let dt: f64 = meta
        .get("dt")
        .ok_or_else(|| bad("header is missing dt"))?
        .parse()
        .map_err(|_| bad("header dt is not a number"))?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(bad("header dt must be positive"));
    }
    Ok(dt)
}

fn check_columns(found: &[String], expected: &[&str]) -> Result<(), CliError> {
    if found.len() != expected.len() || found.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(bad(format!("expected columns {}, found {}", expected.join(","), found.join(","))));
    }
    Ok(())
}

/// Uniform, strictly increasing time stamps.
fn check_times(times: impl Iterator<Item = f64>, dt: f64) -> Result<(), CliError> {
    let mut t0 = None;
    let mut prev = f64::NEG_INFINITY;
    for (k, t) in times.enumerate() {
        let start = *t0.get_or_insert(t);
        if t <= prev {
            return Err(bad(format!("time stamps must increase strictly (row {})", k + 1)));
        }
        let expected = start + k as f64 * dt;
        if (t - expected).abs() > 1e-9 * expected.abs().max(1.0) + 1e-6 * dt {
            return Err(bad(format!("non-uniform sampling at row {}: t = {t}, expected {expected}", k + 1)));
        }
        prev = t;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajRow {
    pub t: f64,
    pub p: [f64; 3],
    pub a: Option<[f64; 3]>,
}

/// Cartesian positions, optionally with accelerations, on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub dt: f64,
    pub units: String,
    pub rows: Vec<TrajRow>,
}

impl TrajectoryFile {
    pub fn has_accel(&self) -> bool {
        self.rows.first().is_some_and(|r| r.a.is_some())
    }

    pub fn render(&self) -> Result<String, CliError> {
        let acc = self.has_accel();
        if self.rows.iter().any(|r| r.a.is_some() != acc) {
            return Err(CliError::Runtime("rows disagree on acceleration columns".into()));
        }
        let mut cols: Vec<&str> = TRAJ_COLUMNS.to_vec();
        if acc {
            cols.extend(ACC_COLUMNS);
        }
        let pre = format!("# waiter-trajectory dt={} units={}", fmt(self.dt), self.units);
        render(
            &pre,
            &cols,
            self.rows.iter().map(|r| {
                let mut v = vec![fmt(r.t), fmt(r.p[0]), fmt(r.p[1]), fmt(r.p[2])];
                if let Some(a) = r.a {
                    v.extend(a.iter().map(|x| fmt(*x)));
                }
                v
            }),
        )
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let p = parse(text, "trajectory")?;
        let dt = meta_dt(&p.meta)?;
        let units = p.meta.get("units").cloned().unwrap_or_else(|| "m".into());
        let acc = p.columns.len() == 7;
        let mut cols: Vec<&str> = TRAJ_COLUMNS.to_vec();
        if acc {
            cols.extend(ACC_COLUMNS);
        }
        check_columns(&p.columns, &cols)?;
        let rows: Vec<TrajRow> = p
            .rows
            .iter()
            .map(|v| TrajRow { t: v[0], p: [v[1], v[2], v[3]], a: acc.then(|| [v[4], v[5], v[6]]) })
            .collect();
        if rows.is_empty() {
            return Err(bad("trajectory has no samples"));
        }
        check_times(rows.iter().map(|r| r.t), dt)?;
        Ok(TrajectoryFile { dt, units, rows })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, self.render()?.as_bytes())
    }
}

/// Homogeneous poses, serialized as position, unit quaternion (w, x, y, z)
/// and the row-major rotation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFile {
    pub dt: f64,
    pub rows: Vec<(f64, Matrix4<f64>)>,
}

fn quaternion(r: &Matrix3<f64>) -> UnitQuaternion<f64> {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    // canonical hemisphere
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

impl PoseFile {
    pub fn render(&self) -> Result<String, CliError> {
        let pre = format!("# waiter-poses dt={} frame=flange", fmt(self.dt));
        render(
            &pre,
            &POSE_COLUMNS,
            self.rows.iter().map(|(t, m)| {
                let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
                let q = quaternion(&r);
                let mut v = vec![fmt(*t), fmt(m[(0, 3)]), fmt(m[(1, 3)]), fmt(m[(2, 3)])];
                v.extend([q.w, q.i, q.j, q.k].iter().map(|x| fmt(*x)));
                for i in 0..3 {
                    for j in 0..3 {
                        v.push(fmt(r[(i, j)]));
                    }
                }
                v
            }),
        )
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let p = parse(text, "poses")?;
        let dt = meta_dt(&p.meta)?;
        check_columns(&p.columns, &POSE_COLUMNS)?;
        let mut rows = Vec::with_capacity(p.rows.len());
        for (k, v) in p.rows.iter().enumerate() {
            let r = Matrix3::from_row_slice(&v[8..17]);
            let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(v[4], v[5], v[6], v[7]));
            let err = (q.to_rotation_matrix().into_inner() - r).amax();
            if err > 1e-9 {
                return Err(bad(format!("row {}: quaternion and matrix disagree by {err:e}", k + 1)));
            }
            let mut m = Matrix4::identity();
            m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
            m.fixed_view_mut::<3, 1>(0, 3).copy_from(&Vector3::new(v[1], v[2], v[3]));
            rows.push((v[0], m));
        }
        check_times(rows.iter().map(|r| r.0), dt)?;
        Ok(PoseFile { dt, rows })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, self.render()?.as_bytes())
    }
}

/// Simulator trace file.
pub fn render_trace(trace: &SimTrace, dt: f64, model: &str) -> Result<String, CliError> {
    let pre = format!("# waiter-simtrace dt={} model={model}", fmt(dt));
    render(
        &pre,
        &TRACE_COLUMNS,
        trace.rows.iter().map(|r| {
            let s = &r.state;
            vec![
                fmt(r.t),
                fmt(s.theta),
                fmt(s.theta_dot),
                fmt(s.d_x),
                fmt(s.d_x_dot),
                s.mode.code().to_string(),
                fmt(r.demand),
                fmt(r.f_s),
            ]
        }),
    )
}

pub fn parse_trace(text: &str) -> Result<SimTrace, CliError> {
    let p = parse(text, "simtrace")?;
    meta_dt(&p.meta)?;
    check_columns(&p.columns, &TRACE_COLUMNS)?;
    let rows = p
        .rows
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mode = ContactMode::from_code(v[5] as i8)
                .filter(|_| v[5].fract() == 0.0)
                .ok_or_else(|| bad(format!("row {}: invalid mode {}", k + 1, v[5])))?;
            Ok(TraceRow {
                t: v[0],
                state: SimState { theta: v[1], theta_dot: v[2], d_x: v[3], d_x_dot: v[4], mode },
                demand: v[6],
                f_s: v[7],
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(SimTrace { rows, transitions: vec![] })
}
