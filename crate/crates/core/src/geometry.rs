//! Unit-cell and pack geometry.
//!
//! Dimensional inputs are in metres. The pack is nondimensionalized by
//! `L̂ = max(L_x, L_y)` and centred on the origin.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Point, Result};

/// Dimensional unit-cell parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCellSpec {
    /// Battery-cell radius.
    pub r_c: f64,
    /// Cooling-pipe radius (0 disables the pipe).
    pub r_w: f64,
    /// Cell to top/bottom unit-cell edge.
    pub d_cc: f64,
    /// Cell to pipe gap.
    pub d1: f64,
    /// Pipe to side unit-cell edge gap.
    pub d2: f64,
}

impl UnitCellSpec {
    /// Reference cylindrical-cell layout.
    pub const fn reference() -> Self {
        UnitCellSpec { r_c: 0.009, r_w: 0.003, d_cc: 0.009, d1: 0.001, d2: 0.002 }
    }
}

/// Area fractions and interface measures of one unit cell, in coordinates
/// where the unit cell is `1 × a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFractions {
    pub phi_p: f64,
    pub phi_c: f64,
    pub phi_w: f64,
    pub area_y: f64,
    pub area_bp: f64,
    pub area_bc: f64,
    pub len_pc: f64,
    pub len_pw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCellGeom {
    pub spec: UnitCellSpec,
    /// Unit-cell width.
    pub ell: f64,
    /// Aspect ratio: height = ell * a.
    pub a: f64,
    /// Pipe centre relative to the cell centre (dimensional).
    pub pipe_offset: Point,
    pub fractions: PhaseFractions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircleKind {
    Cell,
    Pipe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
    pub kind: CircleKind,
}

impl UnitCellGeom {
    /// Circles of a unit cell whose lower-left corner is `origin` and whose
    /// width is `width` (all lengths scaled by `width / ell`).
    pub fn circles_in(&self, origin: Point, width: f64) -> Vec<Circle> {
        let s = width / self.ell;
        let cx = origin[0] + 0.5 * width;
        let cy = origin[1] + 0.5 * width * self.a;
        let mut out = Vec::with_capacity(2);
        if self.spec.r_c > 0.0 {
            out.push(Circle { center: [cx, cy], radius: self.spec.r_c * s, kind: CircleKind::Cell });
        }
        if self.spec.r_w > 0.0 {
            out.push(Circle {
                center: [cx + self.pipe_offset[0] * s, cy + self.pipe_offset[1] * s],
                radius: self.spec.r_w * s,
                kind: CircleKind::Pipe,
            });
        }
        out
    }
}

/// Builds the unit cell. The pipe sits on the right of the cell, `d1` from
/// the cell surface and `d2` from the right unit-cell edge; the remaining
/// degree of freedom is taken up by a vertical offset.
pub fn build_unit_cell(spec: UnitCellSpec) -> Result<UnitCellGeom> {
    let UnitCellSpec { r_c, r_w, d_cc, d1, d2 } = spec;
    for (name, v) in [("r_c", r_c), ("r_w", r_w)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Geometry(format!("{name} must be >= 0, got {v}")));
        }
    }
    for (name, v) in [("d_cc", d_cc), ("d1", d1), ("d2", d2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Geometry(format!("{name} must be > 0, got {v}")));
        }
    }
    let ell = 2.0 * (d1 + d2 + r_c + r_w);
    let a = 2.0 * (d_cc + r_c) / ell;
    let half_h = 0.5 * ell * a;

    let pipe_offset = if r_w > 0.0 {
        let dx = r_c + d1;
        let dy = libm::sqrt(r_w * (2.0 * dx + r_w));
        if dy + r_w >= half_h {
            return Err(Error::Geometry(format!(
                "pipe crosses the unit-cell top edge (reaches {:.6} of half-height {:.6})",
                dy + r_w,
                half_h
            )));
        }
        [dx, dy]
    } else {
        [0.0, 0.0]
    };
    if r_c >= half_h {
        return Err(Error::Geometry("cell crosses the unit-cell top edge".into()));
    }

    let area_y = a;
    let rc = r_c / ell;
    let rw = r_w / ell;
    let area_bc = PI * rc * rc;
    let area_w = PI * rw * rw;
    let phi_c = area_bc / area_y;
    let phi_w = area_w / area_y;
    let phi_p = 1.0 - phi_c - phi_w;
    let fractions = PhaseFractions {
        phi_p,
        phi_c,
        phi_w,
        area_y,
        area_bp: phi_p * area_y,
        area_bc,
        len_pc: 2.0 * PI * rc,
        len_pw: 2.0 * PI * rw,
    };
    Ok(UnitCellGeom { spec, ell, a, pipe_offset, fractions })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Packing,
    Cell,
    Water,
    Outside,
}

/// Dimensionless pack: `nx × ny` unit cells centred on the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PackLayout {
    pub geom: UnitCellGeom,
    pub nx: usize,
    pub ny: usize,
    /// Dimensional pack lengths and the reference length.
    pub l_x: f64,
    pub l_y: f64,
    pub l_hat: f64,
    pub epsilon: f64,
    /// Dimensionless unit-cell width and height.
    pub cell_w: f64,
    pub cell_h: f64,
    /// Dimensionless lower-left corner of the pack.
    pub origin: Point,
    pub cell_centers: Vec<Point>,
    pub pipe_centers: Vec<Point>,
    pub r_c: f64,
    pub r_w: f64,
}

pub fn build_pack_layout(geom: &UnitCellGeom, nx: usize, ny: usize) -> Result<PackLayout> {
    if nx == 0 || ny == 0 {
        return Err(Error::Geometry(format!("pack needs nx, ny >= 1, got {nx} x {ny}")));
    }
    let l_x = nx as f64 * geom.ell;
    let l_y = ny as f64 * geom.ell * geom.a;
    let l_hat = l_x.max(l_y);
    let epsilon = 1.0 / nx.max(ny) as f64;
    let cell_w = geom.ell / l_hat;
    let cell_h = geom.ell * geom.a / l_hat;
    let origin = [-0.5 * l_x / l_hat, -0.5 * l_y / l_hat];
    let mut cell_centers = Vec::with_capacity(nx * ny);
    let mut pipe_centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let c = [origin[0] + (i as f64 + 0.5) * cell_w, origin[1] + (j as f64 + 0.5) * cell_h];
            cell_centers.push(c);
            pipe_centers.push([c[0] + geom.pipe_offset[0] / l_hat, c[1] + geom.pipe_offset[1] / l_hat]);
        }
    }
    Ok(PackLayout {
        geom: *geom,
        nx,
        ny,
        l_x,
        l_y,
        l_hat,
        epsilon,
        cell_w,
        cell_h,
        origin,
        cell_centers,
        pipe_centers,
        r_c: geom.spec.r_c / l_hat,
        r_w: geom.spec.r_w / l_hat,
    })
}

impl PackLayout {
    pub fn x_min(&self) -> f64 {
        self.origin[0]
    }
    pub fn x_max(&self) -> f64 {
        self.origin[0] + self.nx as f64 * self.cell_w
    }
    pub fn y_min(&self) -> f64 {
        self.origin[1]
    }
    pub fn y_max(&self) -> f64 {
        self.origin[1] + self.ny as f64 * self.cell_h
    }

    /// x coordinate of the k-th vertical unit-cell boundary (k = 0..=nx).
    pub fn boundary_x(&self, k: usize) -> f64 {
        self.origin[0] + k as f64 * self.cell_w
    }

    /// Index k if `x` lies on a vertical unit-cell boundary.
    pub fn boundary_index(&self, x: f64) -> Option<usize> {
        let t = (x - self.origin[0]) / self.cell_w;
        let k = libm::round(t);
        if k >= 0.0 && k <= self.nx as f64 && (t - k).abs() < 1e-9 {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + j * self.nx
    }

    /// All circles (cells and pipes) in dimensionless coordinates.
    pub fn circles(&self) -> Vec<Circle> {
        let mut out = Vec::with_capacity(2 * self.nx * self.ny);
        for k in 0..self.cell_centers.len() {
            if self.r_c > 0.0 {
                out.push(Circle { center: self.cell_centers[k], radius: self.r_c, kind: CircleKind::Cell });
            }
            if self.r_w > 0.0 {
                out.push(Circle { center: self.pipe_centers[k], radius: self.r_w, kind: CircleKind::Pipe });
            }
        }
        out
    }

    /// Phase of a dimensionless point; circles are closed disks.
    pub fn classify_point(&self, p: Point) -> Phase {
        let tol = 1e-14;
        if p[0] < self.x_min() - tol || p[0] > self.x_max() + tol || p[1] < self.y_min() - tol || p[1] > self.y_max() + tol {
            return Phase::Outside;
        }
        let fi = ((p[0] - self.origin[0]) / self.cell_w) as isize;
        let fj = ((p[1] - self.origin[1]) / self.cell_h) as isize;
        for dj in -1..=1 {
            for di in -1..=1 {
                let (i, j) = (fi + di, fj + dj);
                if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
                    continue;
                }
                let k = self.cell_index(i as usize, j as usize);
                if self.r_c > 0.0 && dist2(p, self.cell_centers[k]) <= self.r_c * self.r_c {
                    return Phase::Cell;
                }
                if self.r_w > 0.0 && dist2(p, self.pipe_centers[k]) <= self.r_w * self.r_w {
                    return Phase::Water;
                }
            }
        }
        Phase::Packing
    }

    /// Same as [`classify_point`](Self::classify_point) for a dimensional point.
    pub fn classify_point_dimensional(&self, p_hat: Point) -> Phase {
        self.classify_point([p_hat[0] / self.l_hat, p_hat[1] / self.l_hat])
    }

    /// Checks that the line x = `x_hc` crosses only packing and that a
    /// unit-cell-sized window centred on it fits in the pack.
    pub fn validate_coupling_line(&self, x_hc: f64) -> Result<()> {
        let mut reasons: Vec<String> = Vec::new();
        let tol = 1e-12;
        if !(x_hc > self.x_min() + tol && x_hc < self.x_max() - tol) {
            reasons.push(format!("line not strictly inside the pack [{}, {}]", self.x_min(), self.x_max()));
        }
        if x_hc - 0.5 * self.cell_w < self.x_min() - tol || x_hc + 0.5 * self.cell_w > self.x_max() + tol {
            reasons.push("coupling window does not fit inside the pack".into());
        }
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = self.cell_index(i, j);
                if self.r_c > 0.0 && (x_hc - self.cell_centers[k][0]).abs() <= self.r_c {
                    reasons.push(format!("intersects cell circle ({i}, {j})"));
                }
                if self.r_w > 0.0 && (x_hc - self.pipe_centers[k][0]).abs() <= self.r_w {
                    reasons.push(format!("intersects pipe circle ({i}, {j})"));
                }
            }
        }
        if reasons.is_empty() { Ok(()) } else { Err(Error::CouplingLine { x: x_hc, reasons }) }
    }
}

#[inline]
pub(crate) fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_cell_lengths() {
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        assert!((g.ell - 0.03).abs() < 1e-15);
        assert!((g.a - 1.2).abs() < 1e-12);
    }

    #[test]
    fn reference_fractions() {
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let f = g.fractions;
        let phi_c = PI * 0.009f64.powi(2) / (0.03f64.powi(2) * 1.2);
        let phi_w = PI * 0.003f64.powi(2) / (0.03f64.powi(2) * 1.2);
        assert!((f.phi_c - phi_c).abs() < 1e-14);
        assert!((f.phi_w - phi_w).abs() < 1e-14);
        assert!((f.phi_c - 0.23562).abs() < 1e-5);
        assert!((f.phi_w - 0.02618).abs() < 1e-5);
        assert!((f.phi_p - 0.73820).abs() < 1e-5);
        assert!((f.len_pc - 2.0 * PI * 0.3).abs() < 1e-14);
    }

    #[test]
    fn pipe_gaps_match_spacings() {
        let s = UnitCellSpec::reference();
        let g = build_unit_cell(s).unwrap();
        let d = libm::sqrt(g.pipe_offset[0].powi(2) + g.pipe_offset[1].powi(2));
        assert!((d - s.r_c - s.r_w - s.d1).abs() < 1e-15);
        let right_gap = 0.5 * g.ell - g.pipe_offset[0] - s.r_w;
        assert!((right_gap - s.d2).abs() < 1e-15);
    }

    #[test]
    fn degenerate_pipe() {
        let mut s = UnitCellSpec::reference();
        s.r_w = 0.0;
        let g = build_unit_cell(s).unwrap();
        assert_eq!(g.fractions.phi_w, 0.0);
        assert_eq!(g.fractions.len_pw, 0.0);
    }

    #[test]
    fn rejects_nonpositive_spacing() {
        let mut s = UnitCellSpec::reference();
        s.d1 = 0.0;
        assert!(matches!(build_unit_cell(s), Err(Error::Geometry(_))));
        s = UnitCellSpec::reference();
        s.r_c = -1.0;
        assert!(build_unit_cell(s).is_err());
    }

    #[test]
    fn rejects_pipe_through_top() {
        let s = UnitCellSpec { r_c: 0.009, r_w: 0.008, d_cc: 0.001, d1: 0.001, d2: 0.002 };
        assert!(build_unit_cell(s).is_err());
    }

    #[test]
    fn pack_lengths() {
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let p = build_pack_layout(&g, 20, 1).unwrap();
        assert!((p.l_x - 0.6).abs() < 1e-14);
        assert!((p.l_y - 0.036).abs() < 1e-14);
        assert!((p.epsilon - 0.05).abs() < 1e-15);
        assert!((p.cell_w - 0.05).abs() < 1e-15);
        let one = build_pack_layout(&g, 1, 1).unwrap();
        assert_eq!(one.epsilon, 1.0);
        assert!((one.l_x - g.ell).abs() < 1e-15);
        let big = build_pack_layout(&g, 80, 1).unwrap();
        assert!((big.epsilon - 0.0125).abs() < 1e-15);
        assert!(build_pack_layout(&g, 0, 1).is_err());
    }

    #[test]
    fn classification() {
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let p = build_pack_layout(&g, 20, 1).unwrap();
        assert_eq!(p.classify_point(p.cell_centers[3]), Phase::Cell);
        assert_eq!(p.classify_point(p.pipe_centers[3]), Phase::Water);
        let mid = [0.5 * (p.cell_centers[3][0] + p.cell_centers[4][0]), p.cell_centers[3][1]];
        assert_eq!(p.classify_point(mid), Phase::Packing);
        assert_eq!(p.classify_point([0.6, 0.0]), Phase::Outside);
        // just inside the rim
        let edge = [p.cell_centers[0][0] + p.r_c * (1.0 - 1e-12), p.cell_centers[0][1]];
        assert_eq!(p.classify_point(edge), Phase::Cell);
    }

    #[test]
    fn coupling_line_checks() {
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let p = build_pack_layout(&g, 20, 1).unwrap();
        for k in 1..20 {
            assert!(p.validate_coupling_line(p.boundary_x(k)).is_ok(), "k={k}");
        }
        assert!(p.validate_coupling_line(p.cell_centers[5][0]).is_err());
        assert!(p.validate_coupling_line(p.x_max()).is_err());
        match p.validate_coupling_line(p.pipe_centers[2][0]) {
            Err(Error::CouplingLine { reasons, .. }) => assert!(reasons.iter().any(|r| r.contains("pipe"))),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn fractions_sum_to_one(r_c in 0.001f64..0.02, r_w in 0.0f64..0.004, d_cc in 0.004f64..0.02,
                                d1 in 0.0005f64..0.003, d2 in 0.0005f64..0.003) {
            let s = UnitCellSpec { r_c, r_w, d_cc, d1, d2 };
            if let Ok(g) = build_unit_cell(s) {
                let f = g.fractions;
                prop_assert!((f.phi_p + f.phi_c + f.phi_w - 1.0).abs() < 1e-12);
                prop_assert!((g.ell - 2.0 * (d1 + d2 + r_c + r_w)).abs() <= 4.0 * f64::EPSILON * g.ell);
            }
        }

        #[test]
        fn classification_scale_invariant(x in -0.5f64..0.5, y in -0.03f64..0.03) {
            let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
            let p = build_pack_layout(&g, 20, 1).unwrap();
            let dim = [x * p.l_hat, y * p.l_hat];
            prop_assert_eq!(p.classify_point(dim.map(|v| v / p.l_hat)), p.classify_point_dimensional(dim));
        }

        #[test]
        fn boundary_lines_valid(nx in 2usize..30, ny in 1usize..4) {
            let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
            let p = build_pack_layout(&g, nx, ny).unwrap();
            for k in 1..nx {
                prop_assert!(p.validate_coupling_line(p.boundary_x(k)).is_ok());
            }
        }
    }
}
