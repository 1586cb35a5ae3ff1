//! Backward-Euler solver for the coupled packing/cell temperatures.
//!
//! The cell equation is divided by `ϱ` before discretisation so that the
//! linear part is symmetric:
//!
//! ```text
//! M = Mᵖ + (1/ϱ) Mᶜ,   K = Kᵖ + ς Kᶜ + Bi_p [[+1, −1], [−1, +1]] on Γpc
//! ```
//!
//! and the cell load is `𝓡(x) ∫ Π(T_c) v`. Each step solves
//! `F(u) = (M/Δt + K) u − M u⁰/Δt − s(u) + b = 0` by simplified Newton with
//! the factorised linear operator, switching to full Newton if the chord
//! iteration stalls.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{DimGroups, PiVariant, ScenarioConfig, SourceParams, burning};
use crate::fem::{BandedLu, Csr, DofMap, Field, NO_DOF, Triplets, add_boundary_load, add_boundary_mass, add_diffusion, add_mass, iso};
use crate::fem::assembly::{QUAD3, gradient};
use crate::fem::{norm_inf, pcg_with};
use crate::geometry::PackLayout;
use crate::mesh::{FacetTag, PeriodicMap, Region, TriMesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceMode {
    Pi(PiVariant),
    /// Π frozen at a constant.
    Constant(f64),
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineConfig {
    /// Dimensionless conductivities (1 for the reference scaling).
    pub k_p: f64,
    pub k_c: f64,
    pub dt: f64,
    /// Newton stops when the update falls below this (max norm).
    pub step_tol: f64,
    /// ... or the residual falls below this (max norm).
    pub residual_tol: f64,
    pub max_newton: usize,
    pub source: SourceMode,
}

impl FineConfig {
    pub fn new(dt: f64) -> Self {
        FineConfig {
            k_p: 1.0,
            k_c: 1.0,
            dt,
            step_tol: 1e-10,
            residual_tol: 1e-12,
            max_newton: 30,
            source: SourceMode::Pi(PiVariant::Full),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineState {
    pub time: f64,
    /// Global DOF vector `[T_p..., T_c...]`.
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    /// Max-norm residual before each update.
    pub residuals: Vec<f64>,
    pub full_newton: bool,
    /// `𝓡 ∫ Π` at the new state.
    pub source: f64,
    /// `𝓠 q_pw |Γpw|`.
    pub pipe_out: f64,
    /// Σ_r g_r |Γ_HC,r|.
    pub coupling_out: f64,
}

/// Trace of the packing field on one row of the coupling boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowTrace {
    pub t: f64,
    pub dtdx: f64,
}

#[derive(Debug, Clone)]
struct SourceTri {
    dofs: [usize; 3],
    w: f64,
    r: [f64; 3],
    burn: [bool; 3],
}

#[derive(Debug, Clone, Default)]
struct CouplingRow {
    /// (vertex a, vertex b, length) per facet.
    facets: Vec<(usize, usize, f64)>,
    length: f64,
    /// `∫_Γr v` as (dof, value).
    load: Vec<(usize, f64)>,
    /// Adjacent packing triangles.
    tris: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct FineSolver {
    mesh: TriMesh,
    dofs: DofMap,
    groups: DimGroups,
    params: SourceParams,
    scenario: ScenarioConfig,
    cfg: FineConfig,
    mass: Csr,
    stiff: Csr,
    op: Csr,
    lu: BandedLu,
    pipe_load: Vec<f64>,
    pipe_out: f64,
    src: Vec<SourceTri>,
    rows: Vec<CouplingRow>,
}

impl FineSolver {
    pub fn new(
        mesh: TriMesh,
        periodic: &PeriodicMap,
        layout: &PackLayout,
        groups: DimGroups,
        params: SourceParams,
        scenario: ScenarioConfig,
        cfg: FineConfig,
    ) -> Result<Self> {
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be > 0, got {}", cfg.dt)));
        }
        if !(cfg.k_p > 0.0 && cfg.k_c > 0.0) {
            return Err(Error::Domain("conductivities must be > 0".into()));
        }
        if !(groups.varrho > 0.0 && groups.varsigma > 0.0 && groups.bi_p >= 0.0) {
            return Err(Error::Domain("varrho, varsigma must be > 0 and Bi >= 0".into()));
        }
        if !periodic.x_pairs.is_empty() {
            return Err(Error::Mesh("fine subdomain must not be periodic in x".into()));
        }
        let dofs = DofMap::new(&mesh, Some(periodic), true, true);
        let n = dofs.n();

        let mut mt = Triplets::new(n);
        add_mass(&mut mt, &mesh, Some(Region::Packing), &dofs.tp, |_| 1.0, 1.0);
        add_mass(&mut mt, &mesh, Some(Region::Cell), &dofs.tc, |_| 1.0, 1.0 / groups.varrho);
        let mass = mt.build();

        let mut kt = Triplets::new(n);
        add_diffusion(&mut kt, &mesh, Some(Region::Packing), &dofs.tp, |_, _| iso(cfg.k_p), 1.0);
        add_diffusion(&mut kt, &mesh, Some(Region::Cell), &dofs.tc, |_, _| iso(cfg.k_c), groups.varsigma);
        let bp = groups.bi_p;
        let bc = groups.varsigma * groups.bi_c;
        add_boundary_mass(&mut kt, &mesh, FacetTag::PcInterface, &dofs.tp, &dofs.tp, bp);
        add_boundary_mass(&mut kt, &mesh, FacetTag::PcInterface, &dofs.tp, &dofs.tc, -bp);
        add_boundary_mass(&mut kt, &mesh, FacetTag::PcInterface, &dofs.tc, &dofs.tp, -bc);
        add_boundary_mass(&mut kt, &mesh, FacetTag::PcInterface, &dofs.tc, &dofs.tc, bc);
        let stiff = kt.build();

        let op = stiff.lin_comb(1.0, &mass, 1.0 / cfg.dt)?;
        let lu = BandedLu::factor(&op)?;

        let mut pipe_load = vec![0.0; n];
        add_boundary_load(&mut pipe_load, &mesh, FacetTag::PwInterface, &dofs.tp, |_| 1.0, groups.q * scenario.q_pw);
        let pipe_out = pipe_load.iter().sum();

        let mut src = Vec::new();
        for t in 0..mesh.n_triangles() {
            if mesh.regions[t] != Region::Cell {
                continue;
            }
            let tri = mesh.triangles[t];
            let dofs_t = tri.map(|v| dofs.tc[v]);
            if dofs_t.contains(&NO_DOF) {
                return Err(Error::Mesh(format!("cell triangle {t} has a vertex without a cell DOF")));
            }
            let mut r = [0.0; 3];
            let mut burn = [false; 3];
            for (q, l) in QUAD3.iter().enumerate() {
                let p = crate::fem::assembly::bary_point(&mesh, t, *l);
                r[q] = groups.r(p[0]);
                burn[q] = burning(p[0], PiVariant::Full, &scenario);
            }
            src.push(SourceTri { dofs: dofs_t, w: mesh.area(t) / 3.0, r, burn });
        }

        let rows = coupling_rows(&mesh, &dofs, layout);

        Ok(FineSolver { mesh, dofs, groups, params, scenario, cfg, mass, stiff, op, lu, pipe_load, pipe_out, src, rows })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn groups(&self) -> &DimGroups {
        &self.groups
    }

    pub fn params(&self) -> &SourceParams {
        &self.params
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn config(&self) -> &FineConfig {
        &self.cfg
    }

    pub fn mass(&self) -> &Csr {
        &self.mass
    }

    pub fn stiffness(&self) -> &Csr {
        &self.stiff
    }

    /// Changes the time step (refactorises the linear operator).
    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
        }
        if dt != self.cfg.dt {
            self.op = self.stiff.lin_comb(1.0, &self.mass, 1.0 / dt)?;
            self.lu = BandedLu::factor(&self.op)?;
            self.cfg.dt = dt;
        }
        Ok(())
    }

    pub fn initial_state(&self) -> FineState {
        FineState { time: 0.0, u: vec![0.0; self.dofs.n()] }
    }

    /// Number of rows of the coupling boundary (0 without coupling facets).
    pub fn n_coupling_rows(&self) -> usize {
        if self.rows.iter().all(|r| r.facets.is_empty()) { 0 } else { self.rows.len() }
    }

    /// Measure of the coupling boundary in each row.
    pub fn coupling_lengths(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.length).collect()
    }

    /// `1ᵀ M u = ∫ T_p + (1/ϱ) ∫ T_c`.
    pub fn energy(&self, state: &FineState) -> f64 {
        self.mass.mul(&state.u).iter().sum()
    }

    pub fn tp_nodal(&self, state: &FineState) -> Vec<f64> {
        self.dofs.nodal(Field::Tp, &state.u)
    }

    pub fn tc_nodal(&self, state: &FineState) -> Vec<f64> {
        self.dofs.nodal(Field::Tc, &state.u)
    }

    /// `𝓡 ∫ Π(T_c) v`, accumulated into `out`; returns the integral.
    fn source_into(&self, u: &[f64], out: &mut [f64]) -> f64 {
        let mut total = 0.0;
        let mode = self.cfg.source;
        if mode == SourceMode::Off {
            return 0.0;
        }
        for s in &self.src {
            let tv = s.dofs.map(|d| u[d]);
            for (q, l) in QUAD3.iter().enumerate() {
                let pi = match mode {
                    SourceMode::Constant(c) => c,
                    SourceMode::Pi(v) => self.pi_at(tv[0] * l[0] + tv[1] * l[1] + tv[2] * l[2], s.burn[q], v),
                    SourceMode::Off => 0.0,
                };
                let f = s.r[q] * pi * s.w;
                total += f;
                for i in 0..3 {
                    out[s.dofs[i]] += f * l[i];
                }
            }
        }
        total
    }

    #[inline]
    fn pi_at(&self, t: f64, burn_here: bool, v: PiVariant) -> f64 {
        let b = match v {
            PiVariant::Full => burn_here,
            PiVariant::Burning => true,
            PiVariant::NotBurning => false,
        };
        if b { self.params.pi_fb(t) } else { self.params.pi_nb(t) }
    }

    #[inline]
    fn pi_prime_at(&self, t: f64, burn_here: bool, v: PiVariant) -> f64 {
        let b = match v {
            PiVariant::Full => burn_here,
            PiVariant::Burning => true,
            PiVariant::NotBurning => false,
        };
        if b { self.params.pi_fb_prime(t) } else { self.params.pi_nb_prime(t) }
    }

    /// Full Jacobian `M/Δt + K − 𝓡 ∫ Π'(T_c) φ_j φ_i`.
    fn jacobian(&self, u: &[f64]) -> Result<Csr> {
        let n = self.dofs.n();
        let mut t = Triplets::new(n);
        if let SourceMode::Pi(v) = self.cfg.source {
            for s in &self.src {
                let tv = s.dofs.map(|d| u[d]);
                for (q, l) in QUAD3.iter().enumerate() {
                    let d = self.pi_prime_at(tv[0] * l[0] + tv[1] * l[1] + tv[2] * l[2], s.burn[q], v) * s.r[q] * s.w;
                    for i in 0..3 {
                        for j in 0..3 {
                            t.push(s.dofs[i], s.dofs[j], -d * l[i] * l[j]);
                        }
                    }
                }
            }
        }
        let s = t.build();
        self.op.lin_comb(1.0, &s, 1.0)
    }

    fn coupling_load(&self, g: Option<&[f64]>, out: &mut [f64]) -> Result<f64> {
        let Some(g) = g else { return Ok(0.0) };
        if self.n_coupling_rows() == 0 {
            return Err(Error::Mesh("coupling flux given but the mesh has no coupling facets".into()));
        }
        if g.len() != self.rows.len() {
            return Err(Error::Shape(format!("{} coupling values for {} rows", g.len(), self.rows.len())));
        }
        let mut total = 0.0;
        for (row, &gr) in self.rows.iter().zip(g) {
            for &(d, w) in &row.load {
                out[d] += gr * w;
            }
            total += gr * row.length;
        }
        Ok(total)
    }

    /// One backward-Euler step. `coupling` holds the outward normal flux on
    /// Γ_HC for each row (positive leaves the fine domain).
    pub fn step(&self, state: &FineState, coupling: Option<&[f64]>) -> Result<(FineState, StepStats)> {
        self.step_with_guess(state, coupling, None)
    }

    /// [`step`](Self::step) starting the Newton iteration from `guess`.
    pub fn step_with_guess(&self, state: &FineState, coupling: Option<&[f64]>, guess: Option<&[f64]>) -> Result<(FineState, StepStats)> {
        let n = self.dofs.n();
        if state.u.len() != n {
            return Err(Error::Shape(format!("state has {} values, solver {n}", state.u.len())));
        }
        let dt = self.cfg.dt;
        // Constant part: M u⁰/Δt − pipe outflow − coupling outflow.
        let mut rhs = self.mass.mul(&state.u);
        for v in rhs.iter_mut() {
            *v /= dt;
        }
        let mut out = vec![0.0; n];
        let coupling_out = self.coupling_load(coupling, &mut out)?;
        for i in 0..n {
            rhs[i] -= self.pipe_load[i] + out[i];
        }

        let mut u = match guess {
            Some(g) if g.len() == n => g.to_vec(),
            Some(g) => return Err(Error::Shape(format!("guess has {} values, solver {n}", g.len()))),
            None => state.u.clone(),
        };
        let mut stats = StepStats { pipe_out: self.pipe_out, coupling_out, ..Default::default() };
        let mut f = vec![0.0; n];
        let mut prev_step = f64::INFINITY;
        let mut full = false;
        let mut jac: Option<(Csr, Option<BandedLu>)> = None;
        loop {
            self.op.mul_into(&u, &mut f);
            let mut s = vec![0.0; n];
            stats.source = self.source_into(&u, &mut s);
            for i in 0..n {
                f[i] -= rhs[i] + s[i];
            }
            let res = norm_inf(&f);
            if !res.is_finite() {
                stats.residuals.push(res);
                return Err(Error::Newton { residuals: stats.residuals });
            }
            if res <= self.cfg.residual_tol {
                break;
            }
            if stats.iterations >= self.cfg.max_newton {
                stats.residuals.push(res);
                return Err(Error::Newton { residuals: stats.residuals });
            }
            stats.residuals.push(res);
            let delta = if full {
                if jac.is_none() {
                    jac = Some((self.jacobian(&u)?, None));
                }
                let (j, jlu) = jac.as_mut().unwrap();
                if let Some(l) = jlu {
                    l.solve(&f)
                } else {
                    match pcg_with(j, &f, None, 1e-12, 200, |r, z| z.copy_from_slice(&self.lu.solve(r))) {
                        Ok((x, _)) => x,
                        Err(_) => {
                            let l = BandedLu::factor(j)?;
                            let x = l.solve(&f);
                            *jlu = Some(l);
                            x
                        }
                    }
                }
            } else {
                self.lu.solve(&f)
            };
            for i in 0..n {
                u[i] -= delta[i];
            }
            stats.iterations += 1;
            let step = norm_inf(&delta);
            if full {
                // Jacobian is refreshed every full-Newton iteration.
                jac = None;
            } else if stats.iterations > 1 && step > 0.25 * prev_step {
                full = true;
                stats.full_newton = true;
            }
            prev_step = step;
            if step <= self.cfg.step_tol {
                let mut s = vec![0.0; n];
                stats.source = self.source_into(&u, &mut s);
                break;
            }
        }
        Ok((FineState { time: state.time + dt, u }, stats))
    }

    /// Packing-field trace on each coupling row: facet-length-weighted T
    /// and area-weighted ∂T/∂x over the adjacent triangles.
    pub fn trace_coupling(&self, state: &FineState) -> Result<Vec<RowTrace>> {
        if self.n_coupling_rows() == 0 {
            return Err(Error::Mesh("fine mesh has no coupling facets".into()));
        }
        let tp = self.tp_nodal(state);
        self.rows
            .iter()
            .enumerate()
            .map(|(k, row)| {
                if row.facets.is_empty() || row.length <= 0.0 {
                    return Err(Error::Mesh(format!("coupling row {k} has no facets")));
                }
                let t = row.facets.iter().map(|&(a, b, l)| 0.5 * (tp[a] + tp[b]) * l).sum::<f64>() / row.length;
                let mut ga = 0.0;
                let mut area = 0.0;
                for &tri in &row.tris {
                    let a = self.mesh.area(tri);
                    ga += gradient(&self.mesh, tri, &tp)[0] * a;
                    area += a;
                }
                Ok(RowTrace { t, dtdx: ga / area })
            })
            .collect()
    }
}

fn coupling_rows(mesh: &TriMesh, dofs: &DofMap, layout: &PackLayout) -> Vec<CouplingRow> {
    let mut rows = vec![CouplingRow::default(); layout.ny];
    let coupling: Vec<_> = mesh.facets.iter().filter(|f| f.tag == FacetTag::Coupling).collect();
    if coupling.is_empty() {
        return rows;
    }
    let edges = mesh.edge_map();
    for f in coupling {
        let [a, b] = f.v;
        let ym = 0.5 * (mesh.vertices[a][1] + mesh.vertices[b][1]);
        let k = (((ym - layout.y_min()) / layout.cell_h) as usize).min(layout.ny - 1);
        let len = mesh.facet_length(f) * f.weight;
        let row = &mut rows[k];
        row.facets.push((a, b, len));
        row.length += len;
        for (v, w) in [(a, len / 2.0), (b, len / 2.0)] {
            let d = dofs.tp[v];
            if d != NO_DOF {
                row.load.push((d, w));
            }
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if let Some(ts) = edges.get(&key) {
            for &t in ts {
                if mesh.regions[t] == Region::Packing && !row.tris.contains(&t) {
                    row.tris.push(t);
                }
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fine::params::{ReferenceValues, dimensionless_groups, pi_coefficients};
    use crate::geometry::{UnitCellSpec, build_pack_layout, build_unit_cell};
    use crate::mesh::mesh_subdomain;

    struct Setup {
        layout: PackLayout,
        mesh: TriMesh,
        per: PeriodicMap,
        groups: DimGroups,
        params: SourceParams,
        scenario: ScenarioConfig,
    }

    fn setup(h: f64, k1: usize, coupling: bool) -> Setup {
        let geom = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let layout = build_pack_layout(&geom, 20, 1).unwrap();
        let x0 = layout.boundary_x(0);
        let x1 = layout.boundary_x(k1);
        let (mesh, per) = mesh_subdomain(&layout, (x0, x1), h, 24, coupling.then_some(x1)).unwrap();
        let scenario = ScenarioConfig::accuracy();
        let r = ReferenceValues::table3();
        let groups = dimensionless_groups(&r, &layout, &scenario).unwrap();
        let params = pi_coefficients(&r).unwrap();
        Setup { layout, mesh, per, groups, params, scenario }
    }

    fn solver(s: &Setup, groups: DimGroups, scenario: ScenarioConfig, cfg: FineConfig) -> FineSolver {
        FineSolver::new(s.mesh.clone(), &s.per, &s.layout, groups, s.params, scenario, cfg).unwrap()
    }

    #[test]
    fn zero_stays_zero() {
        let s = setup(0.01, 2, false);
        let mut sc = s.scenario;
        sc.q_pw = 0.0;
        let mut cfg = FineConfig::new(1e-3);
        cfg.source = SourceMode::Off;
        let f = solver(&s, s.groups, sc, cfg);
        let mut st = f.initial_state();
        for _ in 0..3 {
            st = f.step(&st, None).unwrap().0;
        }
        assert!(st.u.iter().all(|&v| v == 0.0));
        assert!((st.time - 3e-3).abs() < 1e-15);
    }

    #[test]
    fn decoupled_uniform_source_matches_scalar_ode() {
        let s = setup(0.01, 2, false);
        let mut sc = s.scenario;
        sc.q_pw = 0.0;
        let mut g = s.groups.with_uniform_r(20.0);
        g.bi_p = 0.0;
        g.bi_c = 0.0;
        g.varrho = 0.7;
        let c = 0.3;
        let dt = 2e-3;
        let mut cfg = FineConfig::new(dt);
        cfg.source = SourceMode::Constant(c);
        let f = solver(&s, g, sc, cfg);
        let (st, _) = f.step(&f.initial_state(), None).unwrap();
        let expect = dt * g.varrho * 20.0 * c;
        for d in f.dofs().range(Field::Tc) {
            assert!((st.u[d] - expect).abs() < 1e-10, "{} vs {expect}", st.u[d]);
        }
        for d in f.dofs().range(Field::Tp) {
            assert!(st.u[d].abs() < 1e-12);
        }
        // Second step doubles it.
        let (st2, _) = f.step(&st, None).unwrap();
        for d in f.dofs().range(Field::Tc) {
            assert!((st2.u[d] - 2.0 * expect).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_bookkeeping_with_all_terms() {
        let s = setup(0.01, 2, true);
        let mut sc = s.scenario;
        // Burn front inside the subdomain so both branches are used.
        sc.x_burn = s.layout.boundary_x(1);
        let mut g = s.groups;
        g.x_r = s.layout.boundary_x(1) + 0.01;
        let mut cfg = FineConfig::new(2e-3);
        cfg.source = SourceMode::Pi(PiVariant::Full);
        let f = solver(&s, g, sc, cfg);
        assert_eq!(f.n_coupling_rows(), 1);
        let mut st = f.initial_state();
        for k in 0..5 {
            let flux = [0.05 * (k as f64 - 2.0)];
            let (next, stats) = f.step(&st, Some(&flux)).unwrap();
            let de = f.energy(&next) - f.energy(&st);
            let book = f.config().dt * (stats.source - stats.pipe_out - stats.coupling_out);
            assert!((de - book).abs() <= 1e-8 * de.abs().max(1e-12), "step {k}: {de} vs {book}");
            st = next;
        }
        assert!(st.u.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn heat_is_conserved_without_sources() {
        let s = setup(0.01, 2, false);
        let mut sc = s.scenario;
        sc.q_pw = 0.0;
        let mut cfg = FineConfig::new(5e-3);
        cfg.source = SourceMode::Off;
        let f = solver(&s, s.groups, sc, cfg);
        let tp: Vec<f64> = f.mesh().vertices.iter().map(|p| libm::sin(40.0 * p[0]) + p[1]).collect();
        let tc: Vec<f64> = f.mesh().vertices.iter().map(|p| libm::cos(30.0 * p[1]) * p[0]).collect();
        let mut st = FineState { time: 0.0, u: f.dofs().gather(&tp, &tc) };
        let e0 = f.energy(&st);
        for _ in 0..4 {
            let (next, _) = f.step(&st, None).unwrap();
            assert!((f.energy(&next) - f.energy(&st)).abs() <= 1e-10 * e0.abs().max(1.0));
            st = next;
        }
    }

    #[test]
    fn newton_converges_with_full_source() {
        let s = setup(0.01, 2, false);
        let f = solver(&s, s.groups, s.scenario, FineConfig::new(1e-3));
        let mut st = f.initial_state();
        for _ in 0..10 {
            let (next, stats) = f.step(&st, None).unwrap();
            assert!(stats.iterations <= 15, "{:?} {}", stats.residuals, stats.full_newton);
            st = next;
        }
        let tc = f.tc_nodal(&st);
        let max = tc.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(*v));
        assert!(max > 0.0 && max < 1.2);
    }

    #[test]
    fn linear_and_constant_traces_are_exact() {
        let s = setup(0.01, 3, true);
        let f = solver(&s, s.groups, s.scenario, FineConfig::new(1e-3));
        let x_hc = s.layout.boundary_x(3);
        let tp: Vec<f64> = f.mesh().vertices.iter().map(|p| 2.0 * p[0] - 0.5).collect();
        let st = FineState { time: 0.0, u: f.dofs().gather(&tp, &tp) };
        let tr = f.trace_coupling(&st).unwrap();
        assert_eq!(tr.len(), 1);
        assert!((tr[0].t - (2.0 * x_hc - 0.5)).abs() < 1e-12);
        assert!((tr[0].dtdx - 2.0).abs() < 1e-10);
        let c = vec![0.25; tp.len()];
        let st = FineState { time: 0.0, u: f.dofs().gather(&c, &c) };
        let tr = f.trace_coupling(&st).unwrap();
        assert!((tr[0].t - 0.25).abs() < 1e-14);
        assert!(tr[0].dtdx.abs() < 1e-12);
    }

    #[test]
    fn quadratic_trace_gradient_is_first_order() {
        let mut errs = Vec::new();
        for h in [0.008, 0.004] {
            let s = setup(h, 3, true);
            let f = solver(&s, s.groups, s.scenario, FineConfig::new(1e-3));
            let x_hc = s.layout.boundary_x(3);
            let tp: Vec<f64> = f.mesh().vertices.iter().map(|p| 50.0 * p[0] * p[0]).collect();
            let st = FineState { time: 0.0, u: f.dofs().gather(&tp, &tp) };
            let tr = f.trace_coupling(&st).unwrap();
            assert!((tr[0].t - 50.0 * x_hc * x_hc).abs() < 1e-12);
            errs.push((tr[0].dtdx - 100.0 * x_hc).abs());
        }
        assert!(errs[0] < 100.0 * 0.008, "{errs:?}");
        assert!(errs[1] < 0.75 * errs[0], "{errs:?}");
    }

    #[test]
    fn trace_without_coupling_facets_fails() {
        let s = setup(0.01, 2, false);
        let f = solver(&s, s.groups, s.scenario, FineConfig::new(1e-3));
        assert!(f.trace_coupling(&f.initial_state()).is_err());
        assert!(f.step(&f.initial_state(), Some(&[1.0])).is_err());
    }
}
