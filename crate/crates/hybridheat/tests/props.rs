//! Property tests for configuration handling and the CSV formats.

use hybridheat::compare::compare_fields;
use hybridheat::config::{RunConfig, apply_override, merge, resolve};
use hybridheat::io::{read_averaged, write_averaged};
use hybridheat::run::schedule;
use hybridheat_core::post::AveragedField;
use proptest::prelude::*;
use serde_json::{Value, json};

fn field(nx: usize, ny: usize, y: &[f64], phi: (f64, f64)) -> AveragedField {
    let n = nx * ny;
    let tp_y: Vec<f64> = (0..n).map(|k| y[k % y.len()]).collect();
    let tc_y: Vec<f64> = (0..n).map(|k| y[(k + 1) % y.len()]).collect();
    AveragedField {
        i0: 2,
        nx,
        ny,
        x: (0..nx).map(|i| 0.05 * i as f64).collect(),
        y: (0..ny).map(|j| 0.03 * j as f64).collect(),
        tp_b: tp_y.iter().map(|v| v / phi.0).collect(),
        tc_b: tc_y.iter().map(|v| v / phi.1).collect(),
        tp_y,
        tc_y,
        phi_p: vec![phi.0; n],
        phi_c: vec![phi.1; n],
    }
}

proptest! {
    #[test]
    fn merge_with_itself_is_identity(dt in 1e-6f64..1e-2, nx in 1usize..100, side in prop::bool::ANY) {
        let v = json!({"numerics": {"dt": dt}, "geometry": {"nx": nx}, "coupling": {"side": if side { "left" } else { "right" }}});
        let mut m = v.clone();
        merge(&mut m, v.clone());
        prop_assert_eq!(m, v);
    }

    #[test]
    fn overrides_land_where_addressed(dt in 1e-6f64..1e-2, n in 1usize..10_000, x in -0.5f64..0.5) {
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        apply_override(&mut v, &format!("numerics.dt={dt:e}")).unwrap();
        apply_override(&mut v, &format!("numerics.n_steps={n}")).unwrap();
        apply_override(&mut v, &format!("scenario.x_r = {x}")).unwrap();
        apply_override(&mut v, "mode=fine").unwrap();
        prop_assert_eq!(&v["mode"], &Value::String("fine".into()));
        let c: RunConfig = serde_json::from_value(v).unwrap();
        prop_assert_eq!(c.numerics.dt, dt);
        prop_assert_eq!(c.numerics.steps().unwrap(), n);
        prop_assert_eq!(c.scenario.x_r, x);
        // The same values through the resolver.
        let o = [format!("numerics.dt={dt:e}"), format!("numerics.n_steps={n}")];
        let r = resolve(None, None, false, &o).unwrap();
        prop_assert_eq!(r.numerics.dt, dt);
        prop_assert_eq!(r.numerics.steps().unwrap(), n);
    }

    #[test]
    fn averaged_csv_round_trips(nx in 1usize..6, ny in 1usize..4, y in prop::collection::vec(0.01f64..2.0, 1..12), pp in 0.3f64..0.9, pc in 0.05f64..0.5) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let a = field(nx, ny, &y, (pp, pc));
        write_averaged(&p, &a).unwrap();
        let b = read_averaged(&p).unwrap();
        prop_assert_eq!(&b.tp_y, &a.tp_y);
        prop_assert_eq!(&b.tc_b, &a.tc_b);
        // B-averages are Y-averages over the phase fraction.
        for k in 0..a.len() {
            prop_assert!((b.phi_p[k] - pp).abs() < 1e-12);
            prop_assert!((b.tp_y[k] / b.phi_p[k] - b.tp_b[k]).abs() <= 1e-12 * b.tp_b[k].abs());
            prop_assert!((b.tc_y[k] / b.phi_c[k] - b.tc_b[k]).abs() <= 1e-12 * b.tc_b[k].abs());
        }
    }

    #[test]
    fn comparison_is_symmetric(nx in 1usize..6, ny in 1usize..4, y in prop::collection::vec(-1.0f64..1.0, 1..12), z in prop::collection::vec(-1.0f64..1.0, 1..12), tol in 0.0f64..1.0) {
        let a = field(nx, ny, &y, (0.7, 0.2));
        let b = field(nx, ny, &z, (0.7, 0.2));
        let (ab, _) = compare_fields("t", &a, &b, tol).unwrap();
        let (ba, _) = compare_fields("t", &b, &a, tol).unwrap();
        prop_assert_eq!(ab.max_tp, ba.max_tp);
        prop_assert_eq!(ab.max_tc, ba.max_tc);
        prop_assert_eq!(ab.pass, ba.pass);
        prop_assert_eq!(ab.pass, ab.max_tp <= tol && ab.max_tc <= tol);
        prop_assert!(ab.centerline_tc <= ab.max_tc);
    }

    #[test]
    fn schedule_is_sorted_and_ends_at_last_step(ts in prop::collection::vec(0.0f64..0.3, 0..6), n in 1usize..500) {
        let dt = 1e-3;
        let s = schedule(&ts, dt, n);
        prop_assert_eq!(s.last().map(|x| x.0), Some(n));
        prop_assert!(s.windows(2).all(|w| w[0].0 < w[1].0));
        prop_assert!(s.iter().all(|(k, _)| *k >= 1 && *k <= n));
    }
}
