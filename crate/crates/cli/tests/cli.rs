use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use waiter_cli::config::NoiseSpec;
use waiter_cli::formats::{PoseFile, TrajRow, TrajectoryFile};
use waiter_cli::noise::axis_noise;
use waiter_core::compensation::planar_tilt;
use waiter_core::smoothers::{make_harmonic_t, transfer, SmootherKind};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn waiter(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waiter")).args(args).current_dir(dir).output().expect("binary runs")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--output", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    waiter(&args, out.parent().unwrap())
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn plan_solid_point_to_point() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run("plan", &data("solid_p2p.toml"), &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let plan: serde_json::Value = serde_json::from_str(&read(&out.join("plan.json"))).unwrap();
    let stages = plan["cascade"]["stages"].as_array().unwrap();
    assert_eq!(stages[0]["kind"], "trapezoidal");
    let base = stages[0]["t1"].as_f64().unwrap() + stages[0]["t2"].as_f64().unwrap();
    assert!((base - 0.9).abs() < 1e-12, "{base}");
    let free = plan["free_t"].as_f64().unwrap();
    assert!((plan["duration"].as_f64().unwrap() - (0.9 + 2.0 * free)).abs() < 1e-12);

    let poses = PoseFile::parse(&read(&out.join("trajectory.csv"))).unwrap();
    let reference = TrajectoryFile::parse(&read(&out.join("reference.csv"))).unwrap();
    assert_eq!(poses.rows.len(), reference.rows.len());
    let last = &reference.rows[reference.rows.len() - 1];
    assert!((last.p[0] - 1.0).abs() < 1e-12);
    assert!(read(&out.join("report.txt")).contains("friction floor"));
}

#[test]
fn plan_liquid_lists_damped_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run("plan", &data("liquid_p2p.toml"), &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read(&out.join("report.txt"));
    assert!(report.contains("damped_harmonic sigma="), "{report}");
    assert!(report.contains(" T="), "{report}");
}

#[test]
fn plan_zero_length_move() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "zero.toml",
        "[scenario]\nmaterial = \"solid\"\nmotion = \"point_to_point\"\nstart = [0.2, 0.1, 0.3]\ngoal = [0.2, 0.1, 0.3]\nv_max = 1.0\na_max = 1.0\n[numerics]\ntail = 0.0\n",
    );
    let out = tmp.path().join("out");
    let o = run("plan", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let poses = PoseFile::parse(&read(&out.join("trajectory.csv"))).unwrap();
    assert_eq!(poses.rows.len(), 1);
    let m = poses.rows[0].1;
    assert!((m.fixed_view::<3, 3>(0, 0) - nalgebra::Matrix3::identity()).amax() < 1e-15);
    assert_eq!([m[(0, 3)], m[(1, 3)], m[(2, 3)]], [0.2, 0.1, 0.3]);
}

#[test]
fn plan_rejects_complex_and_bad_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run("plan", &data("hand_filter.toml"), &out, &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("scenario.motion"));

    let bad = read(&data("solid_p2p.toml")).replace("v_max = 2.0", "v_max = \"fast\"");
    let cfg = write_config(tmp.path(), "bad.toml", &bad);
    let o = run("plan", &cfg, &out, &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("scenario.v_max"), "{}", stderr(&o));

    let o = run("plan", &tmp.path().join("missing.toml"), &out, &[]);
    assert_eq!(code(&o), 2);
    let o = waiter(&["plan"], tmp.path());
    assert_eq!(code(&o), 2);
}

fn complex_config(dir: &Path, extra: &str) -> PathBuf {
    write_config(dir, "complex.toml", &format!("[scenario]\nmaterial = \"solid\"\nmotion = \"complex\"\nfree_t = 0.1\n{extra}"))
}

fn trajectory(dt: f64, n: usize, f: impl Fn(f64) -> [f64; 3]) -> TrajectoryFile {
    let rows = (0..n).map(|k| TrajRow { t: k as f64 * dt, p: f(k as f64 * dt), a: None }).collect();
    TrajectoryFile { dt, units: "m".into(), rows }
}

#[test]
fn filter_constant_input_is_delayed_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = complex_config(tmp.path(), "");
    let input = tmp.path().join("in.csv");
    trajectory(0.01, 50, |_| [0.4, -0.2, 1.1]).write(&input).unwrap();
    let out = tmp.path().join("out");
    let o = run("filter", &cfg, &out, &["--input", input.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let f = TrajectoryFile::parse(&read(&out.join("filtered.csv"))).unwrap();
    // delay of two 0.1 s boxes = 20 samples
    assert_eq!(f.rows.len(), 50 + 20);
    assert!((f.rows.last().unwrap().t - (0.49 + 0.2)).abs() < 1e-12);
    for r in &f.rows {
        assert_eq!(r.p, [0.4, -0.2, 1.1]);
        assert_eq!(r.a, Some([0.0; 3]));
    }
    let poses = PoseFile::parse(&read(&out.join("trajectory.csv"))).unwrap();
    for (_, m) in &poses.rows {
        assert!((m.fixed_view::<3, 3>(0, 0) - nalgebra::Matrix3::identity()).amax() < 1e-15);
    }
    assert!(read(&out.join("report.txt")).contains("delay: 0.2 s"));
}

#[test]
fn filter_delay_matches_reported_support() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = complex_config(tmp.path(), "");
    let input = tmp.path().join("in.csv");
    // step at 0.1 s
    trajectory(0.01, 60, |t| [if t > 0.105 { 1.0 } else { 0.0 }, 0.0, 0.0]).write(&input).unwrap();
    let out = tmp.path().join("out");
    assert_eq!(code(&run("filter", &cfg, &out, &["--input", input.to_str().unwrap()])), 0);
    let f = TrajectoryFile::parse(&read(&out.join("filtered.csv"))).unwrap();
    let first_one = f.rows.iter().find(|r| r.p[0] == 1.0).unwrap().t;
    // the input reaches 1 at 0.11 s, the output exactly one support later
    assert!((first_one - 0.31).abs() < 1e-9, "{first_one}");
}

#[test]
fn filter_planar_input_tilts_about_one_axis() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = complex_config(tmp.path(), "");
    let input = tmp.path().join("in.csv");
    trajectory(0.005, 400, |t| [0.3 * (2.0 * t).sin(), 0.25, 0.05 * (3.0 * t).cos()]).write(&input).unwrap();
    let out = tmp.path().join("out");
    assert_eq!(code(&run("filter", &cfg, &out, &["--input", input.to_str().unwrap()])), 0);
    let f = TrajectoryFile::parse(&read(&out.join("filtered.csv"))).unwrap();
    let poses = PoseFile::parse(&read(&out.join("trajectory.csv"))).unwrap();
    let mut max_angle: f64 = 0.0;
    for (row, (_, m)) in f.rows.iter().zip(&poses.rows) {
        let a = row.a.unwrap();
        assert!(a[1].abs() < 1e-12);
        // rotation about the y axis only
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!(m[(i, j)].abs() < 1e-12, "{m}");
        }
        assert!((m[(1, 1)] - 1.0).abs() < 1e-12);
        let angle = m[(0, 2)].atan2(m[(0, 0)]);
        let beta = planar_tilt(a[0], a[2], 9.81).unwrap();
        assert!((angle + beta).abs() < 1e-12, "{angle} vs {beta}");
        max_angle = max_angle.max(angle.abs());
    }
    assert!(max_angle > 0.05);
}

#[test]
fn filter_attenuates_noise_as_predicted() {
    let tmp = tempfile::tempdir().unwrap();
    let (dt, n) = (1e-3, 6000);
    let cfg = complex_config(
        tmp.path(),
        "[numerics]\nseed = 11\nnoise = { amplitude = 0.001, band = [30.0, 60.0], components = 16 }\n",
    );
    let input = tmp.path().join("in.csv");
    trajectory(dt, n, |_| [0.0; 3]).write(&input).unwrap();
    let out = tmp.path().join("out");
    let o = run("filter", &cfg, &out, &["--input", input.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let f = TrajectoryFile::parse(&read(&out.join("filtered.csv"))).unwrap();

    let spec = NoiseSpec { amplitude: 0.001, band: [30.0, 60.0], components: 16 };
    let noise = axis_noise(&spec, 11);
    let h = |w: f64| transfer(&SmootherKind::triangular(0.1), nalgebra::Complex::new(0.0, w)).norm();
    // steady-state window, away from the start and the held tail
    let window = 400..n - 1;
    for axis in 0..3 {
        let raw: f64 = noise[axis].components().iter().map(|(a, w, _)| (a * w * w).powi(2) / 2.0).sum();
        let predicted: f64 = noise[axis].components().iter().map(|(a, w, _)| (a * w * w * h(*w)).powi(2) / 2.0).sum();
        let measured = window.clone().map(|k| f.rows[k].a.unwrap()[axis].powi(2)).sum::<f64>() / window.len() as f64;
        assert!(predicted < 0.05 * raw);
        let ratio = measured / predicted;
        assert!((0.6..1.6).contains(&ratio), "axis {axis}: measured {measured}, predicted {predicted}");
    }

    // a different seed gives a different trace
    let out2 = tmp.path().join("out2");
    run("filter", &cfg, &out2, &["--input", input.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(read(&out.join("filtered.csv")), read(&out2.join("filtered.csv")));
}

#[test]
fn filter_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = complex_config(tmp.path(), "");
    let out = tmp.path().join("out");

    let input = tmp.path().join("uneven.csv");
    std::fs::write(&input, "# waiter-trajectory dt=0.01 units=m\nt[s],x[m],y[m],z[m]\n0,0,0,0\n0.01,0,0,0\n0.025,0,0,0\n")
        .unwrap();
    let o = run("filter", &cfg, &out, &["--input", input.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("non-uniform"), "{}", stderr(&o));

    // falling faster than gravity
    let input = tmp.path().join("drop.csv");
    trajectory(0.01, 200, |t| [0.0, 0.0, -10.0 * t * t]).write(&input).unwrap();
    let o = run("filter", &cfg, &out, &["--input", input.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("t = "), "{}", stderr(&o));

    let o = run("filter", &cfg, &out, &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ok");
    let o = run("simulate", &data("solid_p2p.toml"), &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(read(&out.join("verdict.txt")).starts_with("verdict: PASS"));

    let out = tmp.path().join("liquid");
    let o = run("simulate", &data("liquid_p2p.toml"), &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trace = waiter_cli::formats::parse_trace(&read(&out.join("simtrace.csv"))).unwrap();
    assert!(trace.max_abs_theta() < 1e-6);

    let out = tmp.path().join("fail");
    let o = run("simulate", &data("solid_untilted.toml"), &out, &[]);
    assert_eq!(code(&o), 1);
    let v = read(&out.join("verdict.txt"));
    assert!(v.starts_with("verdict: FAIL") && v.contains("slip distance"), "{v}");
}

#[test]
fn simulate_rest_and_contact_loss() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_text = read(&data("solid_untilted.toml"));
    let cfg = write_config(tmp.path(), "c.toml", &cfg_text);

    let rest = tmp.path().join("rest.csv");
    let mut f = trajectory(0.001, 500, |_| [0.1, 0.0, 0.0]);
    f.rows.iter_mut().for_each(|r| r.a = Some([0.0; 3]));
    f.write(&rest).unwrap();
    let o = run("simulate", &cfg, &tmp.path().join("rest"), &["--input", rest.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let drop = tmp.path().join("drop.csv");
    let mut f = trajectory(0.001, 500, |t| [0.0, 0.0, -7.5 * t * t]);
    f.rows.iter_mut().for_each(|r| r.a = Some([0.0, 0.0, -15.0]));
    f.write(&drop).unwrap();
    let out = tmp.path().join("drop");
    let o = run("simulate", &cfg, &out, &["--input", drop.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(read(&out.join("verdict.txt")).contains("contact lost"));

    let no_plant = write_config(tmp.path(), "np.toml", cfg_text.split("[plant]").next().unwrap());
    let o = run("simulate", &no_plant, &tmp.path().join("np"), &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("plant"));
}

#[test]
fn freqresp_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let wn = 2.0 * PI;
    let t = make_harmonic_t(wn).unwrap();
    let cfg = complex_config(
        tmp.path(),
        &format!("[freqresp]\nomegas = [0.0, {}, {wn}]\nsmoothers = [{{ kind = \"harmonic\", t = {t} }}]\n", 0.4 * wn),
    );
    let out = tmp.path().join("out");
    let o = run("freqresp", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = read(&out.join("freqresp.csv"));
    let rows: Vec<Vec<f64>> =
        text.lines().skip(2).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows[0][1], 1.0);
    assert!((rows[1][1] * 2f64.sqrt() - 1.0).abs() < 0.1, "{}", rows[1][1]);
    assert!(rows[2][1] < 1e-12, "{}", rows[2][1]);

    let out = tmp.path().join("cmp");
    assert_eq!(code(&run("freqresp", &data("freqresp.toml"), &out, &[])), 0);
    let text = read(&out.join("freqresp.csv"));
    assert_eq!(text.lines().count(), 2 + 401);
    assert!(text.lines().nth(1).unwrap() == "omega[rad/s],h1[-],h2[-]");
}

#[test]
fn outputs_are_deterministic_and_dt_override_applies() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run("plan", &data("liquid_p2p.toml"), &a, &[]);
    run("plan", &data("liquid_p2p.toml"), &b, &[]);
    run("plan", &data("liquid_p2p.toml"), &c, &["--dt", "0.002"]);
    for name in ["plan.json", "report.txt", "trajectory.csv", "reference.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert!(read(&c.join("trajectory.csv")).starts_with("# waiter-poses dt=0.002"));
}

#[test]
fn log_level_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_waiter"))
        .args(["plan", "--config", data("solid_p2p.toml").to_str().unwrap(), "--output", out.to_str().unwrap()])
        .env("WAITER_LOG", "info")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("INFO"), "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_waiter"))
        .args(["plan", "--config", data("solid_p2p.toml").to_str().unwrap(), "--output", out.to_str().unwrap()])
        .env("WAITER_LOG", "error")
        .output()
        .unwrap();
    assert!(!stderr(&o).contains("INFO"));
}
