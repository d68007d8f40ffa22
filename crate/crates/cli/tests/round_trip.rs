use proptest::prelude::*;

use waiter_cli::formats::{fmt_float, parse_trace, render_trace, TrajRow, TrajectoryFile};
use waiter_core::dynamics::{ContactMode, SimState, SimTrace, TraceRow};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -1e3..1e3f64,
    ]
}

proptest! {
    #[test]
    fn floats_round_trip(v in finite()) {
        prop_assert_eq!(fmt_float(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn trajectory_files_round_trip(
        dt in 1e-4..1.0f64,
        t0 in -10.0..10.0f64,
        values in prop::collection::vec(prop::array::uniform6(finite()), 1..40),
        acc in any::<bool>(),
    ) {
        let rows = values
            .iter()
            .enumerate()
            .map(|(k, v)| TrajRow { t: t0 + k as f64 * dt, p: [v[0], v[1], v[2]], a: acc.then_some([v[3], v[4], v[5]]) })
            .collect();
        let f = TrajectoryFile { dt, units: "m".into(), rows };
        prop_assert_eq!(TrajectoryFile::parse(&f.render().unwrap()).unwrap(), f);
    }

    #[test]
    fn sim_traces_round_trip(values in prop::collection::vec((prop::array::uniform7(finite()), -1i8..=1), 1..40)) {
        let rows = values
            .iter()
            .map(|(v, m)| TraceRow {
                t: v[0],
                state: SimState {
                    theta: v[1],
                    theta_dot: v[2],
                    d_x: v[3],
                    d_x_dot: v[4],
                    mode: if *m == 0 { ContactMode::Stick } else { ContactMode::Slip(*m) },
                },
                demand: v[5],
                f_s: v[6],
            })
            .collect();
        let tr = SimTrace { rows, transitions: vec![] };
        let back = parse_trace(&render_trace(&tr, 1e-3, "coupled").unwrap()).unwrap();
        prop_assert_eq!(back.rows.len(), tr.rows.len());
        for (a, b) in back.rows.iter().zip(&tr.rows) {
            prop_assert_eq!(a.t.to_bits(), b.t.to_bits());
            prop_assert_eq!(a.state.theta.to_bits(), b.state.theta.to_bits());
            prop_assert_eq!(a.state.d_x_dot.to_bits(), b.state.d_x_dot.to_bits());
            prop_assert_eq!(a.state.mode, b.state.mode);
            prop_assert_eq!(a.f_s.to_bits(), b.f_s.to_bits());
        }
    }
}
