//! Backward-Euler solver for the homogenized two-field model on a
//! structured macro mesh.
//!
//! Advection is written in conservative form, so every outer edge carries
//! zero total effective flux `(U T − V T' − K∇T)·n = 0` as its natural
//! condition. On the coupling boundary the packing field receives the
//! prescribed inflow `g` per row; the cell field keeps the natural
//! zero-flux end. The pipe flux is a uniform constant, so the `R₄⁽ᵖ⁾·∇q`
//! term vanishes identically and is not assembled.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::closure::{EffectiveModel, burn_weight};
use crate::fem::assembly::{QUAD3, bary_point, basis_gradients};
use crate::fem::{BandedLu, Csr, DofMap, Field, Tensor, Triplets, add_diffusion, add_mass, norm_inf};
use crate::fine::{DimGroups, PiVariant, ScenarioConfig, SourceMode, SourceParams};
use crate::mesh::{FacetTag, Locator, PeriodicMap, Region, TriMesh, pair_top_bottom};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpscaledConfig {
    pub dt: f64,
    pub step_tol: f64,
    pub residual_tol: f64,
    pub max_newton: usize,
    pub source: SourceMode,
    /// Uniform pipe flux in units of 𝓠 (the closures already carry 𝓠).
    pub q_pw: f64,
    pub rate: RateField,
}

/// How `R₄⁽ᶜ⁾` sees the heat-generation rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateField {
    /// The scalar coefficient from the closure step (`𝓡 = 𝓡_low`).
    Reference,
    /// `R₄⁽ᶜ⁾` rescaled pointwise by `𝓡(x)`.
    Local,
}

impl UpscaledConfig {
    pub fn new(dt: f64) -> Self {
        UpscaledConfig {
            dt,
            step_tol: 1e-10,
            residual_tol: 1e-13,
            max_newton: 30,
            source: SourceMode::Pi(PiVariant::Full),
            q_pw: 1.0,
            rate: RateField::Reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpscaledState {
    pub time: f64,
    /// `[⟨T_p⟩_Y..., ⟨T_c⟩_Y...]` on the periodic DOFs.
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpscaledStats {
    pub iterations: usize,
    pub residuals: Vec<f64>,
    /// `∫ R₄⁽ᶜ⁾ Π̄`.
    pub source: f64,
    /// `R₃⁽ᵖ⁾ q |Ω|` and `R₃⁽ᶜ⁾ q |Ω|`.
    pub pipe_p: f64,
    pub pipe_c: f64,
    /// Σ_r g_r |Γ_r| (into the upscaled domain).
    pub coupling_in: f64,
}

#[derive(Debug, Clone)]
struct QuadTri {
    dofs: [usize; 3],
    w: f64,
    r4: [f64; 3],
    burn: [f64; 3],
}

#[derive(Debug, Clone, Default)]
struct Row {
    length: f64,
    load: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct UpscaledSolver {
    mesh: TriMesh,
    dofs: DofMap,
    model: EffectiveModel,
    params: SourceParams,
    cfg: UpscaledConfig,
    varrho: f64,
    mass: Csr,
    lin: Csr,
    op: Csr,
    lu: BandedLu,
    pipe: Vec<f64>,
    pipe_p: f64,
    pipe_c: f64,
    quad: Vec<QuadTri>,
    rows: Vec<Row>,
    locator: Locator,
}

/// Both fields on every vertex, identified top to bottom.
fn macro_dofs(mesh: &TriMesh, per: &PeriodicMap) -> DofMap {
    let nv = mesh.n_vertices();
    let masters = per.masters(nv);
    let mut tp = vec![usize::MAX; nv];
    let mut n = 0;
    for v in 0..nv {
        if masters[v] == v {
            tp[v] = n;
            n += 1;
        }
    }
    for v in 0..nv {
        tp[v] = tp[masters[v]];
    }
    let tc = tp.iter().map(|d| d + n).collect();
    DofMap { tp, tc, n_tp: n, n_tc: n }
}

/// `scale · (−∫ T (w·∇v))` into rows `rows`, columns `cols`.
fn add_conservative_advection(out: &mut Triplets, mesh: &TriMesh, rows: &[usize], cols: &[usize], w: [f64; 2], scale: f64) {
    if w == [0.0, 0.0] || scale == 0.0 {
        return;
    }
    for t in 0..mesh.n_triangles() {
        let (g, area) = basis_gradients(mesh, t);
        let tri = mesh.triangles[t];
        for i in 0..3 {
            let wg = -(w[0] * g[i][0] + w[1] * g[i][1]) * area / 3.0 * scale;
            for j in 0..3 {
                out.push(rows[tri[i]], cols[tri[j]], wg);
            }
        }
    }
}

impl UpscaledSolver {
    /// `n_rows` equal horizontal strips split the coupling boundary, if the
    /// mesh has one.
    pub fn new(
        mesh: TriMesh,
        model: EffectiveModel,
        groups: &DimGroups,
        params: SourceParams,
        scenario: &ScenarioConfig,
        cfg: UpscaledConfig,
        n_rows: usize,
    ) -> Result<Self> {
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be > 0, got {}", cfg.dt)));
        }
        if !(model.phi_p > 0.0 && model.phi_c > 0.0) {
            return Err(Error::Domain("homogenized model needs phi_p, phi_c > 0".into()));
        }
        if n_rows == 0 {
            return Err(Error::Domain("need at least one coupling row".into()));
        }
        let per = pair_top_bottom(&mesh)?;
        let dofs = macro_dofs(&mesh, &per);
        let n = dofs.n();
        let m = &model;

        let mut mt = Triplets::new(n);
        add_mass(&mut mt, &mesh, None, &dofs.tp, |_| 1.0, m.phi_p);
        add_mass(&mut mt, &mesh, None, &dofs.tc, |_| 1.0, m.phi_c);
        let mass = mt.build();

        let mut lt = Triplets::new(n);
        let kp: Tensor = m.k_p;
        let kc: Tensor = m.k_c;
        add_diffusion(&mut lt, &mesh, None, &dofs.tp, |_, _| kp, 1.0);
        add_diffusion(&mut lt, &mesh, None, &dofs.tc, |_, _| kc, 1.0);
        add_conservative_advection(&mut lt, &mesh, &dofs.tp, &dofs.tp, m.u_p, 1.0);
        add_conservative_advection(&mut lt, &mesh, &dofs.tp, &dofs.tc, m.v_p, -1.0);
        add_conservative_advection(&mut lt, &mesh, &dofs.tc, &dofs.tc, m.u_c, 1.0);
        add_conservative_advection(&mut lt, &mesh, &dofs.tc, &dofs.tp, m.v_c, -1.0);
        // Exchange: +R₁ᵖ Tp − R₂ᵖ Tc on the packing rows, −R₁ᶜ Tp + R₂ᶜ Tc on the cell rows.
        add_cross_mass(&mut lt, &mesh, &dofs.tp, &dofs.tp, m.r1_p);
        add_cross_mass(&mut lt, &mesh, &dofs.tp, &dofs.tc, -m.r2_p);
        add_cross_mass(&mut lt, &mesh, &dofs.tc, &dofs.tp, -m.r1_c);
        add_cross_mass(&mut lt, &mesh, &dofs.tc, &dofs.tc, m.r2_c);
        let lin = lt.build();
        let op = lin.lin_comb(1.0, &mass, 1.0 / cfg.dt)?;
        let lu = BandedLu::factor(&op)?;

        // −R₃ᵖ q on packing rows, +R₃ᶜ q on cell rows (as a load).
        let mut pipe = vec![0.0; n];
        let mut area = 0.0;
        for t in 0..mesh.n_triangles() {
            let a = mesh.area(t);
            area += a;
            for &v in &mesh.triangles[t] {
                pipe[dofs.tp[v]] -= m.r3_p * cfg.q_pw * a / 3.0;
                pipe[dofs.tc[v]] += m.r3_c * cfg.q_pw * a / 3.0;
            }
        }

        let mut quad = Vec::with_capacity(mesh.n_triangles());
        for t in 0..mesh.n_triangles() {
            let mut r4 = [0.0; 3];
            let mut burn = [0.0; 3];
            for (q, l) in QUAD3.iter().enumerate() {
                let p = bary_point(&mesh, t, *l);
                r4[q] = match cfg.rate {
                    RateField::Reference => m.r4_c,
                    RateField::Local => m.r4_c_at(p[0], groups),
                };
                burn[q] = burn_weight(p[0], scenario);
            }
            quad.push(QuadTri { dofs: mesh.triangles[t].map(|v| dofs.tc[v]), w: mesh.area(t) / 3.0, r4, burn });
        }

        let (lo, hi) = mesh.bounds();
        let row_h = (hi[1] - lo[1]) / n_rows as f64;
        let mut rows = vec![Row::default(); n_rows];
        for f in mesh.facets.iter().filter(|f| f.tag == FacetTag::Coupling) {
            let [a, b] = f.v;
            let ym = 0.5 * (mesh.vertices[a][1] + mesh.vertices[b][1]);
            let k = (((ym - lo[1]) / row_h) as usize).min(n_rows - 1);
            let len = mesh.facet_length(f) * f.weight;
            rows[k].length += len;
            rows[k].load.push((dofs.tp[a], 0.5 * len));
            rows[k].load.push((dofs.tp[b], 0.5 * len));
        }
        let locator = Locator::new(&mesh);
        let regions_ok = mesh.regions.iter().all(|r| *r == Region::Packing);
        if !regions_ok {
            return Err(Error::Mesh("macro mesh must be a single region".into()));
        }

        Ok(UpscaledSolver {
            pipe_p: m.r3_p * cfg.q_pw * area,
            pipe_c: m.r3_c * cfg.q_pw * area,
            mesh,
            dofs,
            model,
            params,
            cfg,
            varrho: groups.varrho,
            mass,
            lin,
            op,
            lu,
            pipe,
            quad,
            rows,
            locator,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn model(&self) -> &EffectiveModel {
        &self.model
    }

    pub fn config(&self) -> &UpscaledConfig {
        &self.cfg
    }

    /// Linear part of the operator without the mass term.
    pub fn linear_operator(&self) -> &Csr {
        &self.lin
    }

    pub fn mass(&self) -> &Csr {
        &self.mass
    }

    pub fn n_coupling_rows(&self) -> usize {
        if self.rows.iter().all(|r| r.load.is_empty()) { 0 } else { self.rows.len() }
    }

    pub fn initial_state(&self) -> UpscaledState {
        UpscaledState { time: 0.0, u: vec![0.0; self.dofs.n()] }
    }

    pub fn tp_nodal(&self, s: &UpscaledState) -> Vec<f64> {
        self.dofs.nodal(Field::Tp, &s.u)
    }

    pub fn tc_nodal(&self, s: &UpscaledState) -> Vec<f64> {
        self.dofs.nodal(Field::Tc, &s.u)
    }

    /// `∫ ⟨T_p⟩_Y + (1/ϱ) ∫ ⟨T_c⟩_Y`, the quantity the exchange terms conserve.
    pub fn energy(&self, s: &UpscaledState) -> f64 {
        let mu = self.mass.mul(&s.u);
        let (np, _) = (self.dofs.n_tp, self.dofs.n_tc);
        let ep: f64 = mu[..np].iter().sum();
        let ec: f64 = mu[np..].iter().sum();
        ep / self.model.phi_p + ec / (self.model.phi_c * self.varrho)
    }

    /// Interpolated packing field at `p`.
    pub fn eval_tp(&self, s: &UpscaledState, p: Point) -> Result<f64> {
        self.eval(s, p, Field::Tp)
    }

    pub fn eval_tc(&self, s: &UpscaledState, p: Point) -> Result<f64> {
        self.eval(s, p, Field::Tc)
    }

    fn eval(&self, s: &UpscaledState, p: Point, f: Field) -> Result<f64> {
        let (t, l) = self
            .locator
            .find(&self.mesh, p, None)
            .ok_or_else(|| Error::Domain(format!("point {p:?} outside the macro mesh")))?;
        let map = self.dofs.map(f);
        let tri = self.mesh.triangles[t];
        Ok((0..3).map(|i| l[i] * s.u[map[tri[i]]]).sum())
    }

    fn pi(&self, t: f64, burn: f64) -> f64 {
        let t = t / self.model.phi_c;
        match self.cfg.source {
            SourceMode::Off => 0.0,
            SourceMode::Constant(c) => c,
            SourceMode::Pi(PiVariant::Burning) => self.params.pi_fb(t),
            SourceMode::Pi(PiVariant::NotBurning) => self.params.pi_nb(t),
            SourceMode::Pi(PiVariant::Full) => burn * self.params.pi_fb(t) + (1.0 - burn) * self.params.pi_nb(t),
        }
    }

    fn pi_prime(&self, t: f64, burn: f64) -> f64 {
        let t = t / self.model.phi_c;
        let d = match self.cfg.source {
            SourceMode::Off | SourceMode::Constant(_) => 0.0,
            SourceMode::Pi(PiVariant::Burning) => self.params.pi_fb_prime(t),
            SourceMode::Pi(PiVariant::NotBurning) => self.params.pi_nb_prime(t),
            SourceMode::Pi(PiVariant::Full) => burn * self.params.pi_fb_prime(t) + (1.0 - burn) * self.params.pi_nb_prime(t),
        };
        d / self.model.phi_c
    }

    fn source_into(&self, u: &[f64], out: &mut [f64]) -> f64 {
        if self.cfg.source == SourceMode::Off {
            return 0.0;
        }
        let mut total = 0.0;
        for q in &self.quad {
            let tv = q.dofs.map(|d| u[d]);
            for (k, l) in QUAD3.iter().enumerate() {
                let f = q.r4[k] * self.pi(tv[0] * l[0] + tv[1] * l[1] + tv[2] * l[2], q.burn[k]) * q.w;
                total += f;
                for i in 0..3 {
                    out[q.dofs[i]] += f * l[i];
                }
            }
        }
        total
    }

    fn jacobian(&self, u: &[f64]) -> Result<Csr> {
        let mut t = Triplets::new(self.dofs.n());
        for q in &self.quad {
            let tv = q.dofs.map(|d| u[d]);
            for (k, l) in QUAD3.iter().enumerate() {
                let d = q.r4[k] * self.pi_prime(tv[0] * l[0] + tv[1] * l[1] + tv[2] * l[2], q.burn[k]) * q.w;
                for i in 0..3 {
                    for j in 0..3 {
                        t.push(q.dofs[i], q.dofs[j], -d * l[i] * l[j]);
                    }
                }
            }
        }
        self.op.lin_comb(1.0, &t.build(), 1.0)
    }

    /// One backward-Euler step; `coupling` is the inflow through Γ_HC per row.
    pub fn step(&self, s: &UpscaledState, coupling: Option<&[f64]>) -> Result<(UpscaledState, UpscaledStats)> {
        self.step_with_guess(s, coupling, None)
    }

    pub fn step_with_guess(
        &self,
        s: &UpscaledState,
        coupling: Option<&[f64]>,
        guess: Option<&[f64]>,
    ) -> Result<(UpscaledState, UpscaledStats)> {
        let n = self.dofs.n();
        if s.u.len() != n {
            return Err(Error::Shape(format!("state has {} values, solver {n}", s.u.len())));
        }
        let dt = self.cfg.dt;
        let mut rhs = self.mass.mul(&s.u);
        for i in 0..n {
            rhs[i] = rhs[i] / dt + self.pipe[i];
        }
        let mut stats = UpscaledStats { pipe_p: self.pipe_p, pipe_c: self.pipe_c, ..Default::default() };
        if let Some(g) = coupling {
            if self.n_coupling_rows() == 0 {
                return Err(Error::Mesh("coupling flux given but the macro mesh has no coupling facets".into()));
            }
            if g.len() != self.rows.len() {
                return Err(Error::Shape(format!("{} coupling values for {} rows", g.len(), self.rows.len())));
            }
            for (row, &gr) in self.rows.iter().zip(g) {
                for &(d, w) in &row.load {
                    rhs[d] += gr * w;
                }
                stats.coupling_in += gr * row.length;
            }
        }
        let mut u = match guess {
            Some(g) if g.len() == n => g.to_vec(),
            Some(g) => return Err(Error::Shape(format!("guess has {} values, solver {n}", g.len()))),
            None => s.u.clone(),
        };
        let mut f = vec![0.0; n];
        let mut prev = f64::INFINITY;
        let mut full = false;
        loop {
            self.op.mul_into(&u, &mut f);
            let mut src = vec![0.0; n];
            stats.source = self.source_into(&u, &mut src);
            for i in 0..n {
                f[i] -= rhs[i] + src[i];
            }
            let res = norm_inf(&f);
            if !res.is_finite() || (res > self.cfg.residual_tol && stats.iterations >= self.cfg.max_newton) {
                stats.residuals.push(res);
                return Err(Error::Newton { residuals: stats.residuals });
            }
            if res <= self.cfg.residual_tol {
                break;
            }
            stats.residuals.push(res);
            let delta = if full { BandedLu::factor(&self.jacobian(&u)?)?.solve(&f) } else { self.lu.solve(&f) };
            for i in 0..n {
                u[i] -= delta[i];
            }
            stats.iterations += 1;
            let step = norm_inf(&delta);
            if !full && stats.iterations > 1 && step > 0.25 * prev {
                full = true;
            }
            prev = step;
            if step <= self.cfg.step_tol {
                let mut src = vec![0.0; n];
                stats.source = self.source_into(&u, &mut src);
                break;
            }
        }
        Ok((UpscaledState { time: s.time + dt, u }, stats))
    }
}

/// `coeff · ∫ u v` between two fields on the whole mesh.
fn add_cross_mass(out: &mut Triplets, mesh: &TriMesh, rows: &[usize], cols: &[usize], coeff: f64) {
    if coeff == 0.0 {
        return;
    }
    for t in 0..mesh.n_triangles() {
        let c = coeff * mesh.area(t) / 12.0;
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                out.push(rows[tri[i]], cols[tri[j]], if i == j { 2.0 * c } else { c });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::{ClosureConfig, effective_coefficients, solve_all_closures};
    use crate::fine::{ReferenceValues, dimensionless_groups, pi_coefficients};
    use crate::geometry::{UnitCellSpec, build_pack_layout, build_unit_cell};
    use crate::mesh::mesh_macro;

    struct Setup {
        model: EffectiveModel,
        groups: DimGroups,
        params: SourceParams,
        scenario: ScenarioConfig,
        mesh: TriMesh,
    }

    fn setup() -> Setup {
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let layout = build_pack_layout(&g, 20, 1).unwrap();
        let scenario = ScenarioConfig::accuracy();
        let r = ReferenceValues::table3();
        let groups = dimensionless_groups(&r, &layout, &scenario).unwrap();
        let cfg = ClosureConfig { h: 1.0 / 20.0, n_seg: 32, ..Default::default() };
        let sol = solve_all_closures(&g, &groups, &cfg).unwrap();
        let model = effective_coefficients(&sol, &g, &groups, layout.epsilon, &cfg).unwrap();
        let mut mesh = mesh_macro([-0.1, layout.y_min()], [layout.x_max(), layout.y_max()], 0.02).unwrap();
        mesh.retag_vertical(FacetTag::Left, -0.1, FacetTag::Coupling);
        Setup { model, groups, params: pi_coefficients(&r).unwrap(), scenario, mesh }
    }

    fn zero_model(m: &EffectiveModel) -> EffectiveModel {
        EffectiveModel {
            u_p: [0.0; 2],
            v_p: [0.0; 2],
            u_c: [0.0; 2],
            v_c: [0.0; 2],
            k_p: [[0.0; 2]; 2],
            k_c: [[0.0; 2]; 2],
            r1_p: 0.0,
            r2_p: 0.0,
            r3_p: 0.0,
            r4_p: [0.0; 2],
            r1_c: 0.0,
            r2_c: 0.0,
            r3_c: 0.0,
            r4_c: 0.0,
            ..*m
        }
    }

    #[test]
    fn zero_coefficients_keep_state() {
        let s = setup();
        let mut cfg = UpscaledConfig::new(1e-3);
        cfg.source = SourceMode::Off;
        cfg.q_pw = 0.0;
        let up = UpscaledSolver::new(s.mesh.clone(), zero_model(&s.model), &s.groups, s.params, &s.scenario, cfg, 1).unwrap();
        let tp: Vec<f64> = up.mesh().vertices.iter().map(|p| libm::sin(5.0 * p[0])).collect();
        let st = UpscaledState { time: 0.0, u: up.dofs().gather(&tp, &tp) };
        let (next, _) = up.step(&st, None).unwrap();
        for (a, b) in st.u.iter().zip(&next.u) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn exchange_vanishes_at_fraction_ratio() {
        let s = setup();
        // Advection moves constants through the outer edges; keep diffusion and exchange.
        let m = &EffectiveModel { u_p: [0.0; 2], v_p: [0.0; 2], u_c: [0.0; 2], v_c: [0.0; 2], ..s.model };
        let up = UpscaledSolver::new(s.mesh.clone(), *m, &s.groups, s.params, &s.scenario, UpscaledConfig::new(1e-3), 1).unwrap();
        let nv = up.mesh().n_vertices();
        // ⟨Tp⟩/⟨Tc⟩ = φp/φc gives zero exchange on both fields.
        let u = up.dofs().gather(&vec![m.phi_p; nv], &vec![m.phi_c; nv]);
        let r = up.linear_operator().mul(&u);
        let scale = m.r1_p * m.phi_p;
        assert!(norm_inf(&r) <= 1e-12 * scale, "{}", norm_inf(&r));
    }

    #[test]
    fn energy_bookkeeping() {
        let s = setup();
        let up = UpscaledSolver::new(s.mesh.clone(), s.model, &s.groups, s.params, &s.scenario, UpscaledConfig::new(2e-3), 1).unwrap();
        let mut st = up.initial_state();
        let w_c = 1.0 / (s.model.phi_c * s.groups.varrho);
        let w_p = 1.0 / s.model.phi_p;
        for k in 0..6 {
            let g = [0.02 * k as f64];
            let (next, stats) = up.step(&st, Some(&g)).unwrap();
            let de = up.energy(&next) - up.energy(&st);
            let book = up.config().dt * (w_c * (stats.source + stats.pipe_c) + w_p * (stats.coupling_in - stats.pipe_p));
            assert!((de - book).abs() <= 1e-8 * de.abs(), "{de} {book}");
            st = next;
        }
    }

    #[test]
    fn coupling_needs_tagged_facets() {
        let s = setup();
        let mesh = mesh_macro([-0.1, -0.03], [0.5, 0.03], 0.02).unwrap();
        let up = UpscaledSolver::new(mesh, s.model, &s.groups, s.params, &s.scenario, UpscaledConfig::new(1e-3), 1).unwrap();
        assert_eq!(up.n_coupling_rows(), 0);
        assert!(up.step(&up.initial_state(), Some(&[0.0])).is_err());
    }

    #[test]
    fn evaluation_reproduces_linear_fields() {
        let s = setup();
        let up = UpscaledSolver::new(s.mesh.clone(), s.model, &s.groups, s.params, &s.scenario, UpscaledConfig::new(1e-3), 1).unwrap();
        let tp: Vec<f64> = up.mesh().vertices.iter().map(|p| 3.0 * p[0] + 1.0).collect();
        let st = UpscaledState { time: 0.0, u: up.dofs().gather(&tp, &tp) };
        for x in [-0.1, 0.0, 0.23, 0.5] {
            assert!((up.eval_tp(&st, [x, 0.0]).unwrap() - (3.0 * x + 1.0)).abs() < 1e-12);
        }
        assert!(up.eval_tp(&st, [-0.3, 0.0]).is_err());
    }

    #[test]
    fn reference_rate_ignores_local_elevation() {
        let s = setup();
        let mesh = mesh_macro([-0.5, -0.03], [0.5, 0.03], 0.02).unwrap();
        let mk = |g: &DimGroups, rate| {
            let mut cfg = UpscaledConfig::new(1e-3);
            cfg.rate = rate;
            UpscaledSolver::new(mesh.clone(), s.model, g, s.params, &s.scenario, cfg, 1).unwrap()
        };
        let uniform = s.groups.with_uniform_r(s.groups.r_low);
        let run = |up: &UpscaledSolver| {
            let mut st = up.initial_state();
            for _ in 0..5 {
                st = up.step(&st, None).unwrap().0;
            }
            st
        };
        let a = run(&mk(&s.groups, RateField::Reference));
        let b = run(&mk(&uniform, RateField::Local));
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((x - y).abs() <= 1e-14, "{x} {y}");
        }
        let local = mk(&s.groups, RateField::Local);
        let c = run(&local);
        let left = [-0.45, 0.0];
        let (tc_c, tc_a) = (local.eval_tc(&c, left).unwrap(), local.eval_tc(&a, left).unwrap());
        assert!(tc_c > 5.0 * tc_a, "{tc_c} {tc_a}");
    }
}
