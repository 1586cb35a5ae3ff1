//! Property tests over the public API.

use hybridheat_core::geometry::{UnitCellSpec, build_pack_layout, build_unit_cell};
use hybridheat_core::hybrid::{BroydenState, IterMode, Window, broyden_solve, clip_to_window, residual};
use hybridheat_core::mesh::mesh_macro;
use hybridheat_core::post::{AveragedField, XrDetection, detect_x_r, error_field, speedup};
use hybridheat_core::special::{erf, erfinv};
use proptest::prelude::*;

fn shoelace(p: &[[f64; 2]]) -> f64 {
    let n = p.len();
    0.5 * (0..n).map(|i| p[i][0] * p[(i + 1) % n][1] - p[(i + 1) % n][0] * p[i][1]).sum::<f64>()
}

fn field(nx: usize, ny: usize, vals: &[f64]) -> AveragedField {
    let n = nx * ny;
    let take = |o: usize| (0..n).map(|k| vals[(k + o) % vals.len()]).collect::<Vec<_>>();
    AveragedField {
        i0: 0,
        nx,
        ny,
        x: (0..nx).map(|i| i as f64).collect(),
        y: (0..ny).map(|j| j as f64).collect(),
        tp_y: take(0),
        tc_y: take(1),
        tp_b: take(2),
        tc_b: take(3),
        phi_p: vec![0.7; n],
        phi_c: vec![0.2; n],
    }
}

proptest! {
    #[test]
    fn phase_fractions_partition_the_cell(r_c in 0.004f64..0.012, r_w in 0.0f64..0.004, d_cc in 0.002f64..0.012, d1 in 0.0005f64..0.003, d2 in 0.0005f64..0.003) {
        if let Ok(g) = build_unit_cell(UnitCellSpec { r_c, r_w, d_cc, d1, d2 }) {
            let f = g.fractions;
            prop_assert!((f.phi_p + f.phi_c + f.phi_w - 1.0).abs() < 1e-12);
            prop_assert!(f.phi_p > 0.0 && f.phi_c > 0.0 && f.phi_w >= 0.0);
            prop_assert_eq!(f.phi_w == 0.0, r_w == 0.0);
        }
    }

    #[test]
    fn cell_boundaries_round_trip(nx in 1usize..60, k in 0usize..60) {
        let l = build_pack_layout(&build_unit_cell(UnitCellSpec::reference()).unwrap(), nx, 1).unwrap();
        let k = k % (nx + 1);
        prop_assert_eq!(l.boundary_index(l.boundary_x(k)), Some(k));
        prop_assert_eq!(l.boundary_index(l.boundary_x(k) + 0.3 * l.cell_w), None);
    }

    #[test]
    fn clipped_polygon_fits_both(cx in -1.0f64..1.0, cy in -1.0f64..1.0, r in 0.05f64..1.0, n in 3usize..12, lo in (-1.0f64..0.5, -1.0f64..0.5), wh in (0.05f64..1.5, 0.05f64..1.5)) {
        let poly: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [cx + r * t.cos(), cy + r * t.sin()]
            })
            .collect();
        let w = Window { lo: [lo.0, lo.1], hi: [lo.0 + wh.0, lo.1 + wh.1] };
        let c = clip_to_window(&poly, &w);
        let a = if c.len() >= 3 { shoelace(&c) } else { 0.0 };
        prop_assert!(a >= -1e-12);
        prop_assert!(a <= shoelace(&poly) + 1e-12 && a <= w.area() + 1e-12);
        for p in &c {
            prop_assert!(p[0] >= w.lo[0] - 1e-12 && p[0] <= w.hi[0] + 1e-12);
            prop_assert!(p[1] >= w.lo[1] - 1e-12 && p[1] <= w.hi[1] + 1e-12);
        }
    }

    #[test]
    fn macro_mesh_covers_rectangle(w in 0.1f64..2.0, h in 0.1f64..2.0, size in 0.05f64..0.5) {
        let m = mesh_macro([-0.3, 0.1], [w - 0.3, h + 0.1], size).unwrap();
        let total: f64 = (0..m.n_triangles()).map(|t| m.area(t)).sum();
        prop_assert!((total - w * h).abs() < 1e-10 * w * h);
        prop_assert!((0..m.n_triangles()).all(|t| m.area(t) > 0.0));
    }

    #[test]
    fn x_r_is_rightmost_elevated_point(rs in prop::collection::vec(1.0f64..3.0, 1..40), alpha in 0.05f64..1.0) {
        let xs: Vec<f64> = (0..rs.len()).map(|i| i as f64 * 0.1).collect();
        match detect_x_r(&xs, &rs, 1.0, alpha).unwrap() {
            XrDetection::Homogeneous => prop_assert!(rs.iter().all(|r| (r - 1.0).abs() < alpha)),
            XrDetection::At(x) => {
                let k = xs.iter().position(|v| *v == x).unwrap();
                prop_assert!((rs[k] - 1.0).abs() >= alpha);
                prop_assert!(rs[k + 1..].iter().all(|r| (r - 1.0).abs() < alpha));
            }
        }
    }

    #[test]
    fn speedup_is_ratio_of_totals(t in prop::collection::vec((0.001f64..1.0, 0.001f64..1.0), 1..30), c in 0.1f64..10.0) {
        let (f, h): (Vec<f64>, Vec<f64>) = t.into_iter().unzip();
        let s = speedup(&f, &h).unwrap();
        prop_assert!((s - f.iter().sum::<f64>() / h.iter().sum::<f64>()).abs() <= 1e-12 * s);
        let scaled: Vec<f64> = h.iter().map(|v| v * c).collect();
        prop_assert!((speedup(&f, &scaled).unwrap() * c - s).abs() <= 1e-12 * s);
        prop_assert!(speedup(&f, &h[1..]).is_err());
    }

    #[test]
    fn error_field_is_symmetric(nx in 1usize..6, ny in 1usize..4, a in prop::collection::vec(-5.0f64..5.0, 4..20), b in prop::collection::vec(-5.0f64..5.0, 4..20)) {
        let fa = field(nx, ny, &a);
        let fb = field(nx, ny, &b);
        let ab = error_field(&fa, &fb).unwrap();
        let ba = error_field(&fb, &fa).unwrap();
        prop_assert_eq!(&ab.tp, &ba.tp);
        prop_assert_eq!(&ab.tc, &ba.tc);
        prop_assert!(ab.tp.iter().chain(&ab.tc).all(|v| *v >= 0.0));
        prop_assert!(error_field(&fa, &fa).unwrap().max() == 0.0);
    }

    #[test]
    fn erfinv_inverts_erf(x in -3.0f64..3.0) {
        let y = erf(x);
        prop_assert!((erfinv(y).unwrap() - x).abs() < 1e-9 * (1.0 + x.abs()) / (1.0 - y.abs()).max(1e-3));
    }

    #[test]
    fn broyden_solves_affine_maps(n in 1usize..6, d in prop::collection::vec(0.7f64..1.6, 6), off in prop::collection::vec(-0.1f64..0.1, 36), b in prop::collection::vec(-1.0f64..1.0, 6)) {
        // Diagonally dominant A, F(q) = A q − b.
        let a = |i: usize, k: usize| if i == k { d[i] } else { off[i * 6 + k] };
        let mut st = BroydenState::new(n, 1e-11, 4 * n + 10, IterMode::Tolerance);
        let hist = broyden_solve(&mut st, |q| Ok((0..n).map(|i| (0..n).map(|k| a(i, k) * q[k]).sum::<f64>() - b[i]).collect())).unwrap();
        prop_assert!(*hist.last().unwrap() <= 1e-11);
        let fq: Vec<f64> = (0..n).map(|i| (0..n).map(|k| a(i, k) * st.q[k]).sum::<f64>() - b[i]).collect();
        prop_assert!(residual(&fq, &vec![0.0; n]).unwrap().max_norm() <= 1e-11);
    }
}
