//! Non-intrusive two-way coupling of a fine subdomain and an upscaled
//! subdomain across a vertical line Γ_HC.
//!
//! Only the packing field is coupled. Each unit-cell row along Γ_HC carries
//! one unresolved flux `q`; a Broyden iteration drives the jump between the
//! upscaled `⟨T_p⟩_Y` and its reconstruction from the fine side to zero.
//!
//! Sign conventions: `n` is the unit normal leaving the fine subdomain.
//! The fine solver takes the outflow `J·n`, the upscaled solver the inflow
//! `φ_p ⟨J⟩·n`; both are positive when heat moves from fine to upscaled.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::closure::EffectiveModel;
use crate::fem::assembly::basis_gradients;
use crate::fem::norm2;
use crate::fine::{DimGroups, FineConfig, FineSolver, FineState, ScenarioConfig, SourceParams, StepStats};
use crate::geometry::PackLayout;
use crate::mesh::{FacetTag, Region, TriMesh, mesh_macro, mesh_subdomain};
use crate::upscaled::{UpscaledConfig, UpscaledSolver, UpscaledState, UpscaledStats};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Taylor,
    Series,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Taylor => "taylor",
            Scheme::Series => "series",
        }
    }
}

/// Side of Γ_HC held by the fine subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FineSide {
    Left,
    Right,
}

impl FineSide {
    /// x component of the unit direction pointing into the fine subdomain.
    pub fn dir_in(self) -> f64 {
        match self {
            FineSide::Left => -1.0,
            FineSide::Right => 1.0,
        }
    }
}

/// Axis-aligned averaging window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: Point,
    pub hi: Point,
}

impl Window {
    pub fn centered(c: Point, w: f64, h: f64) -> Self {
        Window { lo: [c[0] - 0.5 * w, c[1] - 0.5 * h], hi: [c[0] + 0.5 * w, c[1] + 0.5 * h] }
    }

    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    pub fn shifted(&self, dx: f64) -> Self {
        Window { lo: [self.lo[0] + dx, self.lo[1]], hi: [self.hi[0] + dx, self.hi[1]] }
    }
}

/// Sutherland–Hodgman clip of a convex polygon against a rectangle.
pub fn clip_to_window(poly: &[Point], win: &Window) -> Vec<Point> {
    let mut p = poly.to_vec();
    let planes = [(0, win.lo[0], true), (0, win.hi[0], false), (1, win.lo[1], true), (1, win.hi[1], false)];
    for (axis, bound, keep_above) in planes {
        if p.is_empty() {
            break;
        }
        let inside = |q: &Point| if keep_above { q[axis] >= bound } else { q[axis] <= bound };
        let mut out = Vec::with_capacity(p.len() + 2);
        for i in 0..p.len() {
            let a = p[i];
            let b = p[(i + 1) % p.len()];
            let (ia, ib) = (inside(&a), inside(&b));
            if ia {
                out.push(a);
            }
            if ia != ib {
                let t = (bound - a[axis]) / (b[axis] - a[axis]);
                let mut x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                x[axis] = bound;
                out.push(x);
            }
        }
        p = out;
    }
    p
}

fn barycentric(tri: [Point; 3], p: Point) -> [f64; 3] {
    let [a, b, c] = tri;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Linear functionals `(1/|Y|)∫_{𝓑_p∩W} T` and `(1/|Y|)∫_{𝓑_p∩W} ∇T` on
/// per-vertex packing values, with exact clipping of partial triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFunctional {
    pub window: Window,
    /// Packing area inside the window.
    pub area_b: f64,
    /// Packing centroid inside the window.
    pub centroid: Point,
    t_coef: Vec<(usize, f64)>,
    g_coef: Vec<(usize, [f64; 2])>,
}

impl WindowFunctional {
    /// Packing functional; `norm_area` is the `|Y|` the integrals are divided by.
    pub fn build(mesh: &TriMesh, window: Window, norm_area: f64) -> Result<Self> {
        Self::build_in(mesh, window, norm_area, Region::Packing)
    }

    /// Same as [`build`](Self::build) over the triangles of `region`.
    pub fn build_in(mesh: &TriMesh, window: Window, norm_area: f64, region: Region) -> Result<Self> {
        let (mlo, mhi) = mesh.bounds();
        let tol = 1e-9 * (mhi[0] - mlo[0]).max(mhi[1] - mlo[1]);
        if window.lo[0] < mlo[0] - tol || window.hi[0] > mhi[0] + tol || window.lo[1] < mlo[1] - tol || window.hi[1] > mhi[1] + tol {
            return Err(Error::Domain(format!(
                "window [{:?}, {:?}] is outside the fine mesh [{mlo:?}, {mhi:?}]",
                window.lo, window.hi
            )));
        }
        if !(norm_area > 0.0) {
            return Err(Error::Domain(format!("window normalization must be > 0, got {norm_area}")));
        }
        let mut tc: BTreeMap<usize, f64> = BTreeMap::new();
        let mut gc: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
        let mut area_b = 0.0;
        let mut mom = [0.0; 2];
        for t in 0..mesh.n_triangles() {
            if mesh.regions[t] != region {
                continue;
            }
            let tri = mesh.triangles[t];
            let pts = tri.map(|v| mesh.vertices[v]);
            let (bx0, bx1) = (pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max));
            let (by0, by1) = (pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max));
            if bx1 <= window.lo[0] || bx0 >= window.hi[0] || by1 <= window.lo[1] || by0 >= window.hi[1] {
                continue;
            }
            let poly = clip_to_window(&pts, &window);
            if poly.len() < 3 {
                continue;
            }
            let sign = if mesh.area(t) < 0.0 { -1.0 } else { 1.0 };
            let mut a_clip = 0.0;
            for k in 1..poly.len() - 1 {
                let (p0, p1, p2) = (poly[0], poly[k], poly[k + 1]);
                let a = sign * 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
                if a == 0.0 {
                    continue;
                }
                let c = [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0];
                let l = barycentric(pts, c);
                for i in 0..3 {
                    *tc.entry(tri[i]).or_insert(0.0) += a * l[i];
                }
                mom[0] += a * c[0];
                mom[1] += a * c[1];
                a_clip += a;
            }
            if a_clip == 0.0 {
                continue;
            }
            area_b += a_clip;
            let (g, _) = basis_gradients(mesh, t);
            for i in 0..3 {
                let e = gc.entry(tri[i]).or_insert([0.0; 2]);
                e[0] += a_clip * g[i][0];
                e[1] += a_clip * g[i][1];
            }
        }
        if area_b <= 0.0 {
            return Err(Error::Domain(format!("window [{:?}, {:?}] contains no {region:?} area", window.lo, window.hi)));
        }
        let s = 1.0 / norm_area;
        Ok(WindowFunctional {
            window,
            area_b,
            centroid: [mom[0] / area_b, mom[1] / area_b],
            t_coef: tc.into_iter().map(|(v, c)| (v, c * s)).collect(),
            g_coef: gc.into_iter().map(|(v, g)| (v, [g[0] * s, g[1] * s])).collect(),
        })
    }

    /// `(1/|Y|)∫ T` from per-vertex packing values.
    pub fn temperature(&self, tp: &[f64]) -> f64 {
        self.t_coef.iter().map(|&(v, c)| c * tp[v]).sum()
    }

    /// `(1/|Y|)∫ ∇T`.
    pub fn gradient(&self, tp: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for &(v, c) in &self.g_coef {
            g[0] += c[0] * tp[v];
            g[1] += c[1] * tp[v];
        }
        g
    }

    /// `(1/|Y|)∫ J·n` with `J = −k∇T`.
    pub fn flux(&self, tp: &[f64], k: f64, n: [f64; 2]) -> f64 {
        let g = self.gradient(tp);
        -k * (g[0] * n[0] + g[1] * n[1])
    }
}

/// Window data of one unit-cell row along Γ_HC.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRow {
    pub y_lo: f64,
    pub y_hi: f64,
    /// Γ_HC point at mid-row, where the upscaled field is sampled.
    pub mid: Point,
    pub y: Window,
    pub y_in: WindowFunctional,
    pub y_out: Window,
    /// Packing centroid of `Y_out`.
    pub xc_out: Point,
    pub phi_p_out: f64,
    /// `|Y| / |Y_out|`.
    pub alpha: f64,
    /// Full windows at inward offsets ε/2 and ε, when they fit.
    pub series: Option<[WindowFunctional; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBoundary {
    pub x_hc: f64,
    pub side: FineSide,
    pub cell_w: f64,
    pub cell_h: f64,
    /// Packing fraction used in the flux scalings.
    pub phi_p: f64,
    /// Packing conductivity of the fine model.
    pub k_p: f64,
    pub rows: Vec<CouplingRow>,
}

impl CouplingBoundary {
    /// Builds the row windows on the fine mesh. `Y_out` lies in the upscaled
    /// subdomain; its packing content is measured on the fine mesh one unit
    /// cell further inward, which holds the same geometry by periodicity.
    pub fn new(fine_mesh: &TriMesh, layout: &PackLayout, x_hc: f64, side: FineSide, phi_p: f64, k_p: f64) -> Result<Self> {
        layout.validate_coupling_line(x_hc)?;
        if layout.boundary_index(x_hc).is_none() {
            return Err(Error::Domain(format!("x_HC = {x_hc} is not a unit-cell boundary")));
        }
        if !(phi_p > 0.0 && phi_p <= 1.0) {
            return Err(Error::Domain(format!("phi_p must be in (0, 1], got {phi_p}")));
        }
        let (w, h) = (layout.cell_w, layout.cell_h);
        let d = side.dir_in();
        let mut rows = Vec::with_capacity(layout.ny);
        for j in 0..layout.ny {
            let y_lo = layout.y_min() + j as f64 * h;
            let y_hi = y_lo + h;
            let ym = 0.5 * (y_lo + y_hi);
            let y = Window::centered([x_hc, ym], w, h);
            let area_y = y.area();
            let half_in = Window::centered([x_hc + 0.25 * w * d, ym], 0.5 * w, h);
            let y_out = Window::centered([x_hc - 0.25 * w * d, ym], 0.5 * w, h);
            let y_in = WindowFunctional::build(fine_mesh, half_in, area_y)?;
            let image = WindowFunctional::build(fine_mesh, y_out.shifted(d * w), area_y)?;
            let alpha = area_y / y_out.area();
            let phi_p_out = image.area_b / y_out.area();
            let xc_out = [image.centroid[0] - d * w, image.centroid[1]];
            let series = match (
                WindowFunctional::build(fine_mesh, Window::centered([x_hc + 0.5 * w * d, ym], w, h), area_y),
                WindowFunctional::build(fine_mesh, Window::centered([x_hc + w * d, ym], w, h), area_y),
            ) {
                (Ok(a), Ok(b)) => Some([a, b]),
                _ => None,
            };
            rows.push(CouplingRow { y_lo, y_hi, mid: [x_hc, ym], y, y_in, y_out, xc_out, phi_p_out, alpha, series });
        }
        Ok(CouplingBoundary { x_hc, side, cell_w: w, cell_h: h, phi_p, k_p, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Unit normal leaving the fine subdomain.
    pub fn normal(&self) -> [f64; 2] {
        [-self.side.dir_in(), 0.0]
    }

    fn check_q(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.rows.len() {
            return Err(Error::Shape(format!("{} flux values for {} rows", q.len(), self.rows.len())));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite coupling flux".into()));
        }
        Ok(())
    }

    /// First-order reconstruction of `⟨T_ε⁽ᵖ⁾⟩_Y` from the `Y_in` average and
    /// the boundary trace `(T, ∂T/∂x)` of each row.
    pub fn taylor_temperature(&self, tp: &[f64], trace: &[(f64, f64)]) -> Result<Vec<f64>> {
        if trace.len() != self.rows.len() {
            return Err(Error::Shape(format!("{} traces for {} rows", trace.len(), self.rows.len())));
        }
        Ok(self
            .rows
            .iter()
            .zip(trace)
            .map(|(r, &(t, dtdx))| r.y_in.temperature(tp) + r.phi_p_out / r.alpha * (t + dtdx * (r.xc_out[0] - self.x_hc)))
            .collect())
    }

    /// Upscaled-side datum `φ_p⟨J⟩_{Y_in}·n + q`.
    pub fn taylor_flux(&self, tp: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        self.check_q(q)?;
        let n = self.normal();
        Ok(self.rows.iter().zip(q).map(|(r, &qr)| self.phi_p * r.y_in.flux(tp, self.k_p, n) + qr).collect())
    }

    fn series_windows(&self) -> Result<Vec<&[WindowFunctional; 2]>> {
        self.rows
            .iter()
            .map(|r| {
                r.series.as_ref().ok_or_else(|| {
                    Error::Domain(format!(
                        "series windows at x_HC = {} need 1.5 unit cells of fine subdomain",
                        self.x_hc
                    ))
                })
            })
            .collect()
    }

    /// `2⟨T⟩_Y(x_HC + ε/2) − ⟨T⟩_Y(x_HC + ε)` along the inward direction.
    pub fn series_temperature(&self, tp: &[f64]) -> Result<Vec<f64>> {
        Ok(self.series_windows()?.into_iter().map(|[a, b]| 2.0 * a.temperature(tp) - b.temperature(tp)).collect())
    }

    /// `φ_p (2⟨J⟩_Y(x_HC + ε/2) − ⟨J⟩_Y(x_HC + ε))·n`.
    pub fn series_flux(&self, tp: &[f64]) -> Result<Vec<f64>> {
        let n = self.normal();
        Ok(self
            .series_windows()?
            .into_iter()
            .map(|[a, b]| self.phi_p * (2.0 * a.flux(tp, self.k_p, n) - b.flux(tp, self.k_p, n)))
            .collect())
    }

    /// Pointwise Neumann value `J_ε·n` handed to the fine solver.
    pub fn fine_flux_bc(&self, q: &[f64], scheme: Scheme) -> Result<Vec<f64>> {
        self.check_q(q)?;
        self.rows.iter().zip(q).map(|(r, &qr)| Ok(qr * fine_flux_factor(scheme, self.phi_p, r.phi_p_out, r.alpha)?)).collect()
    }
}

/// Scaling of `q` into the fine-side flux: `α/(φ_p φ_p,out)` for Taylor,
/// `1/φ_p²` for Series.
pub fn fine_flux_factor(scheme: Scheme, phi_p: f64, phi_p_out: f64, alpha: f64) -> Result<f64> {
    match scheme {
        Scheme::Taylor => {
            if !(phi_p > 0.0 && phi_p_out > 0.0) {
                return Err(Error::Domain(format!("packing fractions must be > 0, got {phi_p}, {phi_p_out}")));
            }
            Ok(alpha / (phi_p * phi_p_out))
        }
        Scheme::Series => {
            if !(phi_p > 0.0) {
                return Err(Error::Domain(format!("packing fraction must be > 0, got {phi_p}")));
            }
            Ok(1.0 / (phi_p * phi_p))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub f: Vec<f64>,
    pub inf: f64,
    pub l2: f64,
}

impl Residual {
    pub fn max_norm(&self) -> f64 {
        self.inf.max(self.l2)
    }
}

/// `F = upscaled − reconstructed`, with both norms.
pub fn residual(upscaled: &[f64], reconstructed: &[f64]) -> Result<Residual> {
    if upscaled.len() != reconstructed.len() {
        return Err(Error::Shape(format!("{} upscaled vs {} reconstructed rows", upscaled.len(), reconstructed.len())));
    }
    let f: Vec<f64> = upscaled.iter().zip(reconstructed).map(|(a, b)| a - b).collect();
    let inf = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l2 = norm2(&f);
    Ok(Residual { f, inf, l2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterMode {
    /// Iterate until `max(‖F‖_∞, ‖F‖₂) ≤ eps_tol`, failing after `max_iter` passes.
    Tolerance,
    /// Exactly `max_iter` passes per step.
    FixedIter,
}

/// Broyden ("good" variant) state for the per-row fluxes.
#[derive(Debug, Clone, PartialEq)]
pub struct BroydenState {
    pub q: Vec<f64>,
    /// Row-major Jacobian approximation; `None` until seeded.
    pub jac: Option<Vec<f64>>,
    /// Scale of the identity used for seeding and resets.
    pub beta: f64,
    pub eps_tol: f64,
    pub max_iter: usize,
    pub mode: IterMode,
}

impl BroydenState {
    pub fn new(n_rows: usize, eps_tol: f64, max_iter: usize, mode: IterMode) -> Self {
        BroydenState { q: vec![0.0; n_rows], jac: None, beta: 1.0, eps_tol, max_iter, mode }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Sets `J = βI`.
    pub fn seed(&mut self, beta: f64) {
        let beta = if beta.is_finite() && beta.abs() > 1e-300 { beta } else { 1.0 };
        let n = self.n();
        let mut j = vec![0.0; n * n];
        for i in 0..n {
            j[i * n + i] = beta;
        }
        self.beta = beta;
        self.jac = Some(j);
    }

    /// Rank-one update from the previous iterate (if any), then
    /// `q ← q − J⁻¹F`. `f_new` is the residual at the current `q`.
    pub fn update(&mut self, f_new: &[f64], prev: Option<(&[f64], &[f64])>) -> Result<()> {
        let n = self.n();
        if f_new.len() != n {
            return Err(Error::Shape(format!("{} residuals for {n} unknowns", f_new.len())));
        }
        if f_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite coupling residual".into()));
        }
        if self.jac.is_none() {
            self.seed(self.beta);
        }
        if let Some((q_prev, f_prev)) = prev {
            let s: Vec<f64> = self.q.iter().zip(q_prev).map(|(a, b)| a - b).collect();
            let ss: f64 = s.iter().map(|v| v * v).sum();
            if ss > 0.0 {
                let j = self.jac.as_mut().unwrap();
                for i in 0..n {
                    let js: f64 = (0..n).map(|k| j[i * n + k] * s[k]).sum();
                    let c = (f_new[i] - f_prev[i] - js) / ss;
                    for k in 0..n {
                        j[i * n + k] += c * s[k];
                    }
                }
            }
        }
        let step = match dense_solve(self.jac.as_ref().unwrap(), f_new, n) {
            Some(x) => x,
            None => {
                self.seed(self.beta);
                dense_solve(self.jac.as_ref().unwrap(), f_new, n).ok_or_else(|| Error::Domain("Broyden reset failed".into()))?
            }
        };
        for i in 0..n {
            self.q[i] -= step[i];
        }
        Ok(())
    }
}

/// Gaussian elimination with partial pivoting; `None` if (near) singular.
fn dense_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    for c in 0..n {
        let p = (c..n).max_by(|&i, &k| m[i * n + c].abs().total_cmp(&m[k * n + c].abs()))?;
        if m[p * n + c].abs() <= 1e-13 * scale {
            return None;
        }
        if p != c {
            for k in 0..n {
                m.swap(c * n + k, p * n + k);
            }
            x.swap(c, p);
        }
        for i in c + 1..n {
            let f = m[i * n + c] / m[c * n + c];
            for k in c..n {
                m[i * n + k] -= f * m[c * n + k];
            }
            x[i] -= f * x[c];
        }
    }
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| m[c * n + k] * x[k]).sum();
        x[c] = (x[c] - s) / m[c * n + c];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Drives `f(q) = 0` from `state.q`; returns the residual history
/// (`max(‖F‖_∞, ‖F‖₂)` per evaluation).
pub fn broyden_solve(state: &mut BroydenState, mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let mut hist = Vec::new();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    loop {
        let fv = f(&state.q)?;
        let r = residual(&fv, &vec![0.0; fv.len()])?;
        hist.push(r.max_norm());
        let done = match state.mode {
            IterMode::Tolerance => r.max_norm() <= state.eps_tol,
            IterMode::FixedIter => hist.len() >= state.max_iter,
        };
        if done {
            return Ok(hist);
        }
        if hist.len() >= state.max_iter {
            return Err(Error::Coupling { time: f64::NAN, residuals: hist });
        }
        let q_old = state.q.clone();
        state.update(&fv, prev.as_ref().map(|(q, f)| (q.as_slice(), f.as_slice())))?;
        prev = Some((q_old, fv));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub time: f64,
    pub fine: FineState,
    pub up: UpscaledState,
}

/// One coupling pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PassRecord {
    pub q: Vec<f64>,
    /// Flux given to the fine side (outflow) and to the upscaled side (inflow).
    pub fine_bc: Vec<f64>,
    pub datum: Vec<f64>,
    pub upscaled_t: Vec<f64>,
    pub reconstructed_t: Vec<f64>,
    pub residual: Residual,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HybridStepStats {
    pub passes: Vec<PassRecord>,
    pub fine_solves: usize,
    pub upscaled_solves: usize,
    /// Extra solves spent on the Broyden seeding probe.
    pub probe_solves: usize,
    pub fine_newton: usize,
    pub upscaled_newton: usize,
    pub fine: StepStats,
    pub up: UpscaledStats,
}

struct Pass {
    fine: FineState,
    fine_stats: StepStats,
    up: UpscaledState,
    up_stats: UpscaledStats,
    record: PassRecord,
}

/// Mesh and placement choices for a hybrid run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridSetup {
    pub x_hc: f64,
    pub side: FineSide,
    pub h_fine: f64,
    pub n_seg: usize,
    pub h_up: f64,
}

#[derive(Debug, Clone)]
pub struct HybridSolver {
    fine: FineSolver,
    up: UpscaledSolver,
    boundary: CouplingBoundary,
    scheme: Scheme,
    broyden: BroydenState,
}

impl HybridSolver {
    pub fn new(fine: FineSolver, up: UpscaledSolver, boundary: CouplingBoundary, scheme: Scheme, broyden: BroydenState) -> Result<Self> {
        let n = boundary.n_rows();
        if fine.n_coupling_rows() != n || up.n_coupling_rows() != n || broyden.n() != n {
            return Err(Error::Shape(format!(
                "coupling rows: fine {}, upscaled {}, boundary {n}, Broyden {}",
                fine.n_coupling_rows(),
                up.n_coupling_rows(),
                broyden.n()
            )));
        }
        if (fine.config().dt - up.config().dt).abs() > 1e-15 * fine.config().dt {
            return Err(Error::Domain("fine and upscaled time steps differ".into()));
        }
        if scheme == Scheme::Series {
            boundary.series_windows()?;
        }
        Ok(HybridSolver { fine, up, boundary, scheme, broyden })
    }

    /// Meshes both subdomains of `layout` around `setup.x_hc` and builds the
    /// solvers.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        layout: &PackLayout,
        setup: &HybridSetup,
        groups: DimGroups,
        params: SourceParams,
        scenario: ScenarioConfig,
        model: EffectiveModel,
        fine_cfg: FineConfig,
        up_cfg: UpscaledConfig,
        scheme: Scheme,
        broyden: BroydenState,
    ) -> Result<Self> {
        let x = setup.x_hc;
        let (fine_range, up_lo, up_hi, up_tag) = match setup.side {
            FineSide::Left => ((layout.x_min(), x), x, layout.x_max(), FacetTag::Left),
            FineSide::Right => ((x, layout.x_max()), layout.x_min(), x, FacetTag::Right),
        };
        let (fmesh, per) = mesh_subdomain(layout, fine_range, setup.h_fine, setup.n_seg, Some(x))?;
        let boundary = CouplingBoundary::new(&fmesh, layout, x, setup.side, model.phi_p, fine_cfg.k_p)?;
        let fine = FineSolver::new(fmesh, &per, layout, groups, params, scenario, fine_cfg)?;
        let mut umesh = mesh_macro([up_lo, layout.y_min()], [up_hi, layout.y_max()], setup.h_up)?;
        if umesh.retag_vertical(up_tag, x, FacetTag::Coupling) == 0 {
            return Err(Error::Mesh(format!("no macro facets on x_HC = {x}")));
        }
        let up = UpscaledSolver::new(umesh, model, &groups, params, &scenario, up_cfg, layout.ny)?;
        HybridSolver::new(fine, up, boundary, scheme, broyden)
    }

    pub fn fine(&self) -> &FineSolver {
        &self.fine
    }

    pub fn upscaled(&self) -> &UpscaledSolver {
        &self.up
    }

    pub fn boundary(&self) -> &CouplingBoundary {
        &self.boundary
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn broyden(&self) -> &BroydenState {
        &self.broyden
    }

    pub fn initial_state(&self) -> HybridState {
        HybridState { time: 0.0, fine: self.fine.initial_state(), up: self.up.initial_state() }
    }

    /// Reconstructed `⟨T_ε⁽ᵖ⁾⟩_Y` per row for a fine state.
    pub fn reconstruct(&self, fine: &FineState) -> Result<Vec<f64>> {
        let tp = self.fine.tp_nodal(fine);
        match self.scheme {
            Scheme::Taylor => {
                let tr: Vec<(f64, f64)> = self.fine.trace_coupling(fine)?.iter().map(|r| (r.t, r.dtdx)).collect();
                self.boundary.taylor_temperature(&tp, &tr)
            }
            Scheme::Series => self.boundary.series_temperature(&tp),
        }
    }

    /// Upscaled-side datum for a fine state and flux `q`.
    pub fn datum(&self, fine: &FineState, q: &[f64]) -> Result<Vec<f64>> {
        let tp = self.fine.tp_nodal(fine);
        match self.scheme {
            Scheme::Taylor => self.boundary.taylor_flux(&tp, q),
            Scheme::Series => {
                self.boundary.check_q(q)?;
                self.boundary.series_flux(&tp)
            }
        }
    }

    /// Upscaled `⟨T_p⟩` at the mid-row points of Γ_HC.
    pub fn upscaled_boundary_t(&self, up: &UpscaledState) -> Result<Vec<f64>> {
        self.boundary.rows.iter().map(|r| self.up.eval_tp(up, r.mid)).collect()
    }

    fn evaluate(&self, s: &HybridState, q: &[f64], guess: Option<&Pass>) -> Result<Pass> {
        let fine_bc = self.boundary.fine_flux_bc(q, self.scheme)?;
        let (fine, fine_stats) = self.fine.step_with_guess(&s.fine, Some(&fine_bc), guess.map(|g| g.fine.u.as_slice()))?;
        let datum = self.datum(&fine, q)?;
        let (up, up_stats) = self.up.step_with_guess(&s.up, Some(&datum), guess.map(|g| g.up.u.as_slice()))?;
        let reconstructed_t = self.reconstruct(&fine)?;
        let upscaled_t = self.upscaled_boundary_t(&up)?;
        let residual = residual(&upscaled_t, &reconstructed_t)?;
        Ok(Pass {
            fine,
            fine_stats,
            up,
            up_stats,
            record: PassRecord { q: q.to_vec(), fine_bc, datum, upscaled_t, reconstructed_t, residual },
        })
    }

    /// Advances both subdomains by one step (steps 1 to 6 of the coupling
    /// loop). The flux unknowns are carried over to the next call.
    pub fn step(&mut self, s: &HybridState) -> Result<(HybridState, HybridStepStats)> {
        if (s.fine.time - s.up.time).abs() > 1e-12 * s.time.abs().max(1.0) {
            return Err(Error::Domain(format!("fine time {} and upscaled time {} differ", s.fine.time, s.up.time)));
        }
        let mut stats = HybridStepStats::default();
        let mut cur = self.evaluate(s, &self.broyden.q.clone(), None)?;
        stats.fine_solves += 1;
        stats.upscaled_solves += 1;

        if self.broyden.jac.is_none() {
            // One finite-difference probe on the first row.
            let dq = 1e-2 * self.broyden.q.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let mut qp = self.broyden.q.clone();
            qp[0] += dq;
            let probe = self.evaluate(s, &qp, Some(&cur))?;
            stats.probe_solves += 1;
            self.broyden.seed((probe.record.residual.f[0] - cur.record.residual.f[0]) / dq);
        }

        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        loop {
            stats.fine_newton += cur.fine_stats.iterations;
            stats.upscaled_newton += cur.up_stats.iterations;
            let f = cur.record.residual.f.clone();
            let norm = cur.record.residual.max_norm();
            stats.passes.push(cur.record.clone());
            let n_done = stats.passes.len();
            let converged = norm <= self.broyden.eps_tol;
            match self.broyden.mode {
                IterMode::Tolerance => {
                    if converged {
                        break;
                    }
                    if n_done >= self.broyden.max_iter {
                        return Err(Error::Coupling {
                            time: s.time + self.fine.config().dt,
                            residuals: stats.passes.iter().map(|p| p.residual.max_norm()).collect(),
                        });
                    }
                }
                IterMode::FixedIter => {
                    if n_done >= self.broyden.max_iter {
                        if !converged {
                            // Warm start for the next step.
                            self.broyden.update(&f, prev.as_ref().map(|(q, f)| (q.as_slice(), f.as_slice())))?;
                        }
                        break;
                    }
                }
            }
            let q_old = self.broyden.q.clone();
            self.broyden.update(&f, prev.as_ref().map(|(q, f)| (q.as_slice(), f.as_slice())))?;
            prev = Some((q_old, f));
            let q = self.broyden.q.clone();
            cur = self.evaluate(s, &q, Some(&cur))?;
            stats.fine_solves += 1;
            stats.upscaled_solves += 1;
        }
        stats.fine = cur.fine_stats;
        stats.up = cur.up_stats;
        Ok((HybridState { time: cur.fine.time, fine: cur.fine, up: cur.up }, stats))
    }
}
