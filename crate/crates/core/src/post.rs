//! Unit-cell averages, error grids, centerlines, `x_R` detection and
//! speedup.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::fine::{FineSolver, FineState};
use crate::geometry::PackLayout;
use crate::hybrid::{FineSide, HybridSolver, HybridState, Window, WindowFunctional};
use crate::mesh::{Region, TriMesh};
use crate::upscaled::{UpscaledSolver, UpscaledState};
use crate::{Error, Result};

/// Per-unit-cell averages over columns `i0..i0 + nx` and all `ny` rows.
/// Cell `(i, j)` is stored at `(i − i0) + j·nx`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedField {
    pub i0: usize,
    pub nx: usize,
    pub ny: usize,
    /// Column and row centres.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub tp_y: Vec<f64>,
    pub tc_y: Vec<f64>,
    pub tp_b: Vec<f64>,
    pub tc_b: Vec<f64>,
    /// Phase fractions used for the `𝓑` normalization.
    pub phi_p: Vec<f64>,
    pub phi_c: Vec<f64>,
}

impl AveragedField {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Global `(i, j)` of the k-th stored cell.
    pub fn index(&self, k: usize) -> (usize, usize) {
        (self.i0 + k % self.nx, k / self.nx)
    }

    pub fn at(&self, i: usize, j: usize) -> Option<usize> {
        (i >= self.i0 && i < self.i0 + self.nx && j < self.ny).then(|| (i - self.i0) + j * self.nx)
    }

    /// Joins two fields covering adjacent column ranges.
    pub fn concat(a: &AveragedField, b: &AveragedField) -> Result<AveragedField> {
        let (l, r) = if a.i0 <= b.i0 { (a, b) } else { (b, a) };
        if l.ny != r.ny || l.i0 + l.nx != r.i0 {
            return Err(Error::Shape(format!(
                "columns {}..{} and {}..{} ({} and {} rows) are not adjacent",
                l.i0,
                l.i0 + l.nx,
                r.i0,
                r.i0 + r.nx,
                l.ny,
                r.ny
            )));
        }
        let nx = l.nx + r.nx;
        let join = |f: fn(&AveragedField) -> &Vec<f64>| {
            let mut v = Vec::with_capacity(nx * l.ny);
            for j in 0..l.ny {
                v.extend_from_slice(&f(l)[j * l.nx..(j + 1) * l.nx]);
                v.extend_from_slice(&f(r)[j * r.nx..(j + 1) * r.nx]);
            }
            v
        };
        let mut x = l.x.clone();
        x.extend_from_slice(&r.x);
        Ok(AveragedField {
            i0: l.i0,
            nx,
            ny: l.ny,
            x,
            y: l.y.clone(),
            tp_y: join(|f| &f.tp_y),
            tc_y: join(|f| &f.tc_y),
            tp_b: join(|f| &f.tp_b),
            tc_b: join(|f| &f.tc_b),
            phi_p: join(|f| &f.phi_p),
            phi_c: join(|f| &f.phi_c),
        })
    }
}

fn column_window(layout: &PackLayout, i: usize, j: usize) -> Window {
    let lo = [layout.boundary_x(i), layout.y_min() + j as f64 * layout.cell_h];
    Window { lo, hi: [lo[0] + layout.cell_w, lo[1] + layout.cell_h] }
}

/// Columns whose unit cells lie entirely inside `mesh`.
pub fn covered_columns(mesh: &TriMesh, layout: &PackLayout) -> Range<usize> {
    let (lo, hi) = mesh.bounds();
    let tol = 1e-9 * layout.cell_w;
    let first = (0..layout.nx).find(|&i| layout.boundary_x(i) >= lo[0] - tol).unwrap_or(layout.nx);
    let last = (0..=layout.nx).rev().find(|&i| layout.boundary_x(i) <= hi[0] + tol).unwrap_or(0);
    first..last.max(first)
}

/// `⟨·⟩_Y` and `⟨·⟩_𝓑` of per-vertex fields over the unit cells in
/// columns `cols`. Partial triangles are clipped at cell edges.
pub fn cell_average(mesh: &TriMesh, tp: &[f64], tc: &[f64], layout: &PackLayout, cols: Range<usize>) -> Result<AveragedField> {
    let covered = covered_columns(mesh, layout);
    let missing: Vec<String> = cols.clone().filter(|i| !covered.contains(i)).map(|i| format!("{i}")).collect();
    if !missing.is_empty() || cols.end > layout.nx {
        return Err(Error::Domain(format!("fine field does not cover unit-cell columns [{}]", missing.join(", "))));
    }
    if tp.len() != mesh.n_vertices() || tc.len() != mesh.n_vertices() {
        return Err(Error::Shape(format!("{} / {} values for {} vertices", tp.len(), tc.len(), mesh.n_vertices())));
    }
    let nx = cols.len();
    let ny = layout.ny;
    let mut out = AveragedField {
        i0: cols.start,
        nx,
        ny,
        x: cols.clone().map(|i| layout.boundary_x(i) + 0.5 * layout.cell_w).collect(),
        y: (0..ny).map(|j| layout.y_min() + (j as f64 + 0.5) * layout.cell_h).collect(),
        tp_y: Vec::with_capacity(nx * ny),
        tc_y: Vec::with_capacity(nx * ny),
        tp_b: Vec::with_capacity(nx * ny),
        tc_b: Vec::with_capacity(nx * ny),
        phi_p: Vec::with_capacity(nx * ny),
        phi_c: Vec::with_capacity(nx * ny),
    };
    let has_cells = mesh.regions.contains(&Region::Cell);
    for j in 0..ny {
        for i in cols.clone() {
            let w = column_window(layout, i, j);
            let area = w.area();
            let p = WindowFunctional::build_in(mesh, w, area, Region::Packing)?;
            let phi_p = p.area_b / area;
            let tpy = p.temperature(tp);
            out.tp_y.push(tpy);
            out.tp_b.push(tpy / phi_p);
            out.phi_p.push(phi_p);
            if has_cells {
                let c = WindowFunctional::build_in(mesh, w, area, Region::Cell)?;
                let phi_c = c.area_b / area;
                let tcy = c.temperature(tc);
                out.tc_y.push(tcy);
                out.tc_b.push(tcy / phi_c);
                out.phi_c.push(phi_c);
            } else {
                out.tc_y.push(0.0);
                out.tc_b.push(0.0);
                out.phi_c.push(0.0);
            }
        }
    }
    if out.tp_y.iter().chain(&out.tc_y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite unit-cell average".into()));
    }
    Ok(out)
}

/// Unit-cell averages of a fine state over every column it covers.
pub fn fine_average(solver: &FineSolver, state: &FineState, layout: &PackLayout) -> Result<AveragedField> {
    let mesh = solver.mesh();
    let cols = covered_columns(mesh, layout);
    cell_average(mesh, &solver.tp_nodal(state), &solver.tc_nodal(state), layout, cols)
}

/// Upscaled fields sampled at unit-cell centres of `cols`.
pub fn upscaled_average(solver: &UpscaledSolver, state: &UpscaledState, layout: &PackLayout, cols: Range<usize>) -> Result<AveragedField> {
    let m = solver.model();
    let nx = cols.len();
    let ny = layout.ny;
    let mut out = AveragedField {
        i0: cols.start,
        nx,
        ny,
        x: cols.clone().map(|i| layout.boundary_x(i) + 0.5 * layout.cell_w).collect(),
        y: (0..ny).map(|j| layout.y_min() + (j as f64 + 0.5) * layout.cell_h).collect(),
        tp_y: Vec::with_capacity(nx * ny),
        tc_y: Vec::with_capacity(nx * ny),
        tp_b: Vec::with_capacity(nx * ny),
        tc_b: Vec::with_capacity(nx * ny),
        phi_p: alloc::vec![m.phi_p; nx * ny],
        phi_c: alloc::vec![m.phi_c; nx * ny],
    };
    for j in 0..ny {
        for k in 0..nx {
            let p = [out.x[k], out.y[j]];
            let tp = solver.eval_tp(state, p)?;
            let tc = solver.eval_tc(state, p)?;
            out.tp_y.push(tp);
            out.tc_y.push(tc);
            out.tp_b.push(tp / m.phi_p);
            out.tc_b.push(tc / m.phi_c);
        }
    }
    Ok(out)
}

/// Fine averages on the fine side joined with upscaled samples on the other.
pub fn hybrid_average(solver: &HybridSolver, state: &HybridState, layout: &PackLayout) -> Result<AveragedField> {
    let k = layout
        .boundary_index(solver.boundary().x_hc)
        .ok_or_else(|| Error::Domain("x_HC is not a unit-cell boundary".into()))?;
    let (fine_cols, up_cols) = match solver.boundary().side {
        FineSide::Left => (0..k, k..layout.nx),
        FineSide::Right => (k..layout.nx, 0..k),
    };
    let f = cell_average(
        solver.fine().mesh(),
        &solver.fine().tp_nodal(&state.fine),
        &solver.fine().tc_nodal(&state.fine),
        layout,
        fine_cols,
    )?;
    let u = upscaled_average(solver.upscaled(), &state.up, layout, up_cols)?;
    AveragedField::concat(&f, &u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorField {
    pub i0: usize,
    pub nx: usize,
    pub ny: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub tp: Vec<f64>,
    pub tc: Vec<f64>,
}

impl ErrorField {
    pub fn max_tp(&self) -> f64 {
        self.tp.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn max_tc(&self) -> f64 {
        self.tc.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn max(&self) -> f64 {
        self.max_tp().max(self.max_tc())
    }
}

/// `|⟨T⟩_test − ⟨T⟩_ref|` cell by cell (`⟨·⟩_Y` averages).
pub fn error_field(test: &AveragedField, reference: &AveragedField) -> Result<ErrorField> {
    if (test.i0, test.nx, test.ny) != (reference.i0, reference.nx, reference.ny) {
        return Err(Error::Shape(format!(
            "grids differ: columns {}+{} x {} rows vs {}+{} x {}",
            test.i0, test.nx, test.ny, reference.i0, reference.nx, reference.ny
        )));
    }
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    Ok(ErrorField {
        i0: test.i0,
        nx: test.nx,
        ny: test.ny,
        x: test.x.clone(),
        y: test.y.clone(),
        tp: d(&test.tp_y, &reference.tp_y),
        tc: d(&test.tc_y, &reference.tc_y),
    })
}

/// Index of the row whose centre is closest to y = 0 (lower index on ties).
pub fn centerline_row(avg: &AveragedField) -> Result<usize> {
    if avg.is_empty() {
        return Err(Error::Domain("empty averaged field".into()));
    }
    let mut best = 0;
    for j in 1..avg.ny {
        if avg.y[j].abs() < avg.y[best].abs() - 1e-12 {
            best = j;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centerline {
    pub row: usize,
    pub x: Vec<f64>,
    pub tp: Vec<f64>,
    pub tc: Vec<f64>,
}

pub fn centerline(avg: &AveragedField) -> Result<Centerline> {
    let j = centerline_row(avg)?;
    let r = j * avg.nx..(j + 1) * avg.nx;
    Ok(Centerline { row: j, x: avg.x.clone(), tp: avg.tp_y[r.clone()].to_vec(), tc: avg.tc_y[r].to_vec() })
}

/// Largest per-cell change between two snapshots on the same grid.
pub fn max_change(a: &AveragedField, b: &AveragedField) -> Result<f64> {
    let e = error_field(a, b)?;
    Ok(e.max())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XrDetection {
    /// `|𝓡/𝓡_low − 1| < α₁` everywhere.
    Homogeneous,
    At(f64),
}

/// Right edge of the region where `|𝓡(x)/𝓡_low − 1| ≥ α₁`.
pub fn detect_x_r(xs: &[f64], rs: &[f64], r_low: f64, alpha1: f64) -> Result<XrDetection> {
    if xs.len() != rs.len() || xs.is_empty() {
        return Err(Error::Shape(format!("{} positions for {} rates", xs.len(), rs.len())));
    }
    if !(r_low > 0.0 && alpha1 > 0.0) {
        return Err(Error::Domain(format!("need R_low > 0 and alpha1 > 0, got {r_low}, {alpha1}")));
    }
    let hit = xs
        .iter()
        .zip(rs)
        .filter(|(_, r)| (*r / r_low - 1.0).abs() >= alpha1)
        .map(|(x, _)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(if hit.is_finite() { XrDetection::At(hit) } else { XrDetection::Homogeneous })
}

/// `Σ t_fine / Σ t_hybrid`.
pub fn speedup(fine: &[f64], hybrid: &[f64]) -> Result<f64> {
    if fine.len() != hybrid.len() {
        return Err(Error::Shape(format!("{} fine vs {} hybrid step times", fine.len(), hybrid.len())));
    }
    let d: f64 = hybrid.iter().sum();
    if !(d > 0.0) {
        return Err(Error::Domain("hybrid time total is zero".into()));
    }
    Ok(fine.iter().sum::<f64>() / d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{UnitCellSpec, build_pack_layout, build_unit_cell};
    use crate::mesh::{mesh_pack, mesh_subdomain};

    fn layout(nx: usize, ny: usize) -> PackLayout {
        build_pack_layout(&build_unit_cell(UnitCellSpec::reference()).unwrap(), nx, ny).unwrap()
    }

    fn region_moment(m: &TriMesh, r: Region, w: &Window, f: impl Fn([f64; 2]) -> f64) -> (f64, f64) {
        let mut a = 0.0;
        let mut mom = 0.0;
        for t in 0..m.n_triangles() {
            let c = m.centroid(t);
            if m.regions[t] == r && c[0] > w.lo[0] && c[0] < w.hi[0] && c[1] > w.lo[1] && c[1] < w.hi[1] {
                a += m.area(t).abs();
                mom += m.area(t).abs() * f(c);
            }
        }
        (a, mom)
    }

    #[test]
    fn constant_and_linear_fields() {
        let l = layout(20, 1);
        let (m, _) = mesh_subdomain(&l, (l.x_min(), l.boundary_x(4)), 0.005, 24, None).unwrap();
        let c = alloc::vec![0.8; m.n_vertices()];
        let avg = cell_average(&m, &c, &c, &l, 0..4).unwrap();
        for k in 0..4 {
            assert!((avg.tp_b[k] - 0.8).abs() < 1e-12 && (avg.tc_b[k] - 0.8).abs() < 1e-12);
            assert!((avg.tp_y[k] - 0.8 * avg.phi_p[k]).abs() < 1e-12);
            assert!((avg.tc_y[k] - 0.8 * avg.phi_c[k]).abs() < 1e-12);
        }
        let f = |p: [f64; 2]| 3.0 * p[0] - p[1];
        let t: Vec<f64> = m.vertices.iter().map(|p| f(*p)).collect();
        let avg = cell_average(&m, &t, &t, &l, 1..3).unwrap();
        for k in 0..2 {
            let w = column_window(&l, 1 + k, 0);
            let (_, mp) = region_moment(&m, Region::Packing, &w, f);
            let (_, mc) = region_moment(&m, Region::Cell, &w, f);
            assert!((avg.tp_y[k] - mp / w.area()).abs() < 1e-8);
            assert!((avg.tc_y[k] - mc / w.area()).abs() < 1e-8);
            assert!((avg.tp_b[k] * avg.phi_p[k] - avg.tp_y[k]).abs() < 1e-12);
            assert!((avg.tc_b[k] * avg.phi_c[k] - avg.tc_y[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_coverage_is_rejected() {
        let l = layout(20, 1);
        let (m, _) = mesh_subdomain(&l, (l.x_min(), l.boundary_x(3)), 0.008, 24, None).unwrap();
        assert_eq!(covered_columns(&m, &l), 0..3);
        match cell_average(&m, &alloc::vec![0.0; m.n_vertices()], &alloc::vec![0.0; m.n_vertices()], &l, 2..5) {
            Err(Error::Domain(s)) => assert!(s.contains("3, 4"), "{s}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_grid() {
        let l = layout(6, 2);
        let (m, _) = mesh_pack(&l, 0.02, 16).unwrap();
        let t: Vec<f64> = m.vertices.iter().map(|p| p[0] * p[0]).collect();
        let a = cell_average(&m, &t, &t, &l, 0..6).unwrap();
        let e = error_field(&a, &a).unwrap();
        assert_eq!(e.max(), 0.0);
        let mut b = a.clone();
        b.tp_y.iter_mut().chain(b.tc_y.iter_mut()).for_each(|v| *v += 0.03);
        let e = error_field(&a, &b).unwrap();
        assert!(e.tp.iter().chain(&e.tc).all(|v| (v - 0.03).abs() < 1e-12));
        assert_eq!(error_field(&b, &a).unwrap(), e);
        let c = cell_average(&m, &t, &t, &l, 0..5).unwrap();
        assert!(error_field(&a, &c).is_err());
    }

    #[test]
    fn centerline_rows() {
        let l = layout(4, 1);
        let (m, _) = mesh_pack(&l, 0.05, 16).unwrap();
        let z = alloc::vec![0.0; m.n_vertices()];
        let a = cell_average(&m, &z, &z, &l, 0..4).unwrap();
        assert_eq!(centerline_row(&a).unwrap(), 0);

        let l = layout(3, 10);
        let (m, _) = mesh_pack(&l, 0.02, 16).unwrap();
        let t: Vec<f64> = m.vertices.iter().map(|p| libm::sin(5.0 * p[0])).collect();
        let a = cell_average(&m, &t, &t, &l, 0..3).unwrap();
        // Centres at ±0.0..., tie resolved to the lower index.
        assert_eq!(centerline_row(&a).unwrap(), 4);
        // Every row holds the same geometry, so an x-only field gives the row mean.
        let cl = centerline(&a).unwrap();
        for i in 0..3 {
            let mean: f64 = (0..10).map(|j| a.tp_y[i + 3 * j]).sum::<f64>() / 10.0;
            assert!((cl.tp[i] - mean).abs() < 1e-10);
        }
    }

    fn r_profile(x: f64, x_r: f64) -> f64 {
        110.0 - 90.0 * libm::tanh(100.0 * (x - x_r))
    }

    #[test]
    fn x_r_detection_matches_root() {
        let x_r = -0.3125;
        let xs: Vec<f64> = (0..=1000).map(|k| -0.5 + k as f64 * 1e-3).collect();
        let rs: Vec<f64> = xs.iter().map(|&x| r_profile(x, x_r)).collect();
        let XrDetection::At(est) = detect_x_r(&xs, &rs, 20.0, 0.01).unwrap() else { panic!() };
        // Bisection on R(x) = 20 (1 + α₁).
        let (mut a, mut b) = (x_r, 0.5);
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if r_profile(c, x_r) >= 20.2 { a = c } else { b = c }
        }
        assert!((est - a).abs() <= 1e-3 + 1e-12, "{est} vs {a}");
        let analytic = x_r + libm::atanh(1.0 - 2.0 * 0.01 / 9.0) / 100.0;
        assert!((a - analytic).abs() < 1e-9);

        assert_eq!(detect_x_r(&xs, &alloc::vec![20.0; xs.len()], 20.0, 0.01).unwrap(), XrDetection::Homogeneous);
        assert_eq!(detect_x_r(&xs, &alloc::vec![200.0; xs.len()], 20.0, 0.01).unwrap(), XrDetection::At(0.5));
        assert!(detect_x_r(&xs, &rs[1..], 20.0, 0.01).is_err());
    }

    #[test]
    fn speedup_ratio() {
        assert_eq!(speedup(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(speedup(&[2.0, 4.0], &[1.0, 2.0]).unwrap(), 2.0);
        assert!(speedup(&[1.0], &[0.0]).is_err());
        assert!(speedup(&[1.0], &[1.0, 1.0]).is_err());
    }
}
