//! Unit-cell closure problems and the effective coefficients of the
//! homogenized model.
//!
//! All five problems are periodic, pure-Neumann and solved on a unit cell of
//! width 1 (fast-variable units). The constant nullspace is handled with a
//! mean-value Lagrange multiplier: for `[K m; mᵀ 0]` the multiplier is
//! `λ = 1ᵀb / 1ᵀm`, after which `K χ = b − λ m` is compatible and is solved
//! with one DOF held fixed, then shifted to zero mean. `λ` measures the
//! discrete incompatibility and is reported.
//!
//! Interface lengths and region areas in the sources are the analytic ones;
//! volume loads are rescaled by `|B| / |B_h|` so that they integrate to the
//! analytic totals, which keeps the discrete compatibility residual at
//! rounding level.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::fem::assembly::{basis_gradients, gradient};
use crate::fem::{BandedLu, Csr, DofMap, NO_DOF, Tensor, Triplets, add_boundary_load, add_diffusion, add_load, iso};
use crate::fine::{DimGroups, ScenarioConfig, SourceParams};
use crate::geometry::UnitCellGeom;
use crate::mesh::{FacetTag, PeriodicMap, Region, TriMesh, mesh_unit_cell};
use crate::{Error, Result};

const COMPAT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosureProblem {
    P1,
    P2,
    P3,
    C1,
    C2,
}

impl ClosureProblem {
    pub fn name(self) -> &'static str {
        match self {
            ClosureProblem::P1 => "p1",
            ClosureProblem::P2 => "p2",
            ClosureProblem::P3 => "p3",
            ClosureProblem::C1 => "c1",
            ClosureProblem::C2 => "c2",
        }
    }

    fn region(self) -> Region {
        match self {
            ClosureProblem::P1 | ClosureProblem::P2 | ClosureProblem::P3 => Region::Packing,
            ClosureProblem::C1 | ClosureProblem::C2 => Region::Cell,
        }
    }
}

/// One scalar closure field (or one component of a vector field).
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureField {
    /// Per-vertex values; NaN outside the problem's region.
    pub values: Vec<f64>,
    /// Lagrange multiplier of the mean constraint, times the region area.
    pub compatibility: f64,
    /// Region mean after the shift.
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureConfig {
    /// Target edge length in unit-cell widths.
    pub h: f64,
    pub n_seg: usize,
    pub k_p: f64,
    pub k_c: f64,
}

impl Default for ClosureConfig {
    fn default() -> Self {
        ClosureConfig { h: 1.0 / 40.0, n_seg: 64, k_p: 1.0, k_c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureSolutions {
    pub mesh: TriMesh,
    pub periodic: PeriodicMap,
    pub p1: ClosureField,
    pub p2: ClosureField,
    pub p3: [ClosureField; 2],
    /// Absent when the unit cell has no battery cell.
    pub c1: Option<ClosureField>,
    pub c2: Option<[ClosureField; 2]>,
}

/// Effective coefficients of the two-field homogenized model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveModel {
    pub u_p: [f64; 2],
    pub v_p: [f64; 2],
    pub u_c: [f64; 2],
    pub v_c: [f64; 2],
    pub k_p: Tensor,
    pub k_c: Tensor,
    pub r1_p: f64,
    pub r2_p: f64,
    pub r3_p: f64,
    pub r4_p: [f64; 2],
    pub r1_c: f64,
    pub r2_c: f64,
    pub r3_c: f64,
    /// `φ_c² ϱ 𝓡_ref`; scale by `𝓡(x) / 𝓡_ref` for a varying rate.
    pub r4_c: f64,
    pub r_ref: f64,
    pub phi_p: f64,
    pub phi_c: f64,
    pub epsilon: f64,
}

impl EffectiveModel {
    /// `R₄⁽ᶜ⁾` at `x` for the rate field of `groups`.
    pub fn r4_c_at(&self, x: f64, groups: &DimGroups) -> f64 {
        if self.r_ref == 0.0 { 0.0 } else { self.r4_c * groups.r(x) / self.r_ref }
    }
}

fn dof_map(mesh: &TriMesh, per: &PeriodicMap, region: Region) -> DofMap {
    match region {
        Region::Packing => DofMap::new(mesh, Some(per), true, false),
        Region::Cell => DofMap::new(mesh, Some(per), false, true),
    }
}

fn region_dofs(d: &DofMap, region: Region) -> (&[usize], usize) {
    match region {
        Region::Packing => (&d.tp, d.n_tp),
        Region::Cell => (&d.tc, d.n_tc),
    }
}

/// Solves `K χ = b` with the mean constraint; `m` is the lumped constraint
/// vector `∫ v`.
fn solve_constrained(k: &Csr, b: &[f64], m: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = k.n;
    if n == 0 {
        return Err(Error::Mesh("closure region has no DOFs".into()));
    }
    let area: f64 = m.iter().sum();
    let lambda = b.iter().sum::<f64>() / area;
    let rhs: Vec<f64> = b.iter().zip(m).map(|(bi, mi)| bi - lambda * mi).collect();
    // Hold the last DOF at zero.
    let last = n - 1;
    let mut t = Triplets::new(n);
    for i in 0..n {
        let (c, v) = k.row(i);
        for (&j, &x) in c.iter().zip(v) {
            if i != last && j != last {
                t.push(i, j, x);
            }
        }
    }
    t.push(last, last, 1.0);
    let kp = t.build();
    let mut r = rhs;
    r[last] = 0.0;
    let lu = BandedLu::factor(&kp)?;
    let mut x = lu.solve(&r);
    let mean = crate::fem::dot(&x, m) / area;
    for v in x.iter_mut() {
        *v -= mean;
    }
    Ok((x, lambda * area))
}

fn lumped_mass(mesh: &TriMesh, map: &[usize], n: usize, region: Region) -> Vec<f64> {
    let mut m = vec![0.0; n];
    add_load(&mut m, mesh, Some(region), map, |_| 1.0, 1.0);
    m
}

fn field(mesh: &TriMesh, map: &[usize], x: &[f64], compat: f64, region: Region) -> ClosureField {
    let values: Vec<f64> = map.iter().map(|&d| if d == NO_DOF { f64::NAN } else { x[d] }).collect();
    let mean = region_integral(mesh, &values, region) / mesh.region_area(region);
    ClosureField { values, compatibility: compat, mean }
}

fn region_integral(mesh: &TriMesh, values: &[f64], region: Region) -> f64 {
    (0..mesh.n_triangles())
        .filter(|&t| mesh.regions[t] == region)
        .map(|t| {
            let [a, b, c] = mesh.triangles[t];
            mesh.area(t) * (values[a] + values[b] + values[c]) / 3.0
        })
        .sum()
}

/// `∫_B ∇χ` over the field's region.
fn gradient_integral(mesh: &TriMesh, values: &[f64], region: Region) -> [f64; 2] {
    let mut g = [0.0; 2];
    for t in 0..mesh.n_triangles() {
        if mesh.regions[t] != region {
            continue;
        }
        let gt = gradient(mesh, t, values);
        let a = mesh.area(t);
        g[0] += a * gt[0];
        g[1] += a * gt[1];
    }
    g
}

/// `⟨χ⟩_Γpc` with measure-corrected facets.
fn interface_mean(mesh: &TriMesh, values: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut len = 0.0;
    for f in mesh.facets.iter().filter(|f| f.tag == FacetTag::PcInterface) {
        let l = mesh.facet_length(f) * f.weight;
        s += 0.5 * (values[f.v[0]] + values[f.v[1]]) * l;
        len += l;
    }
    if len == 0.0 { 0.0 } else { s / len }
}

/// Solves one closure problem on a periodic unit-cell mesh of width 1.
/// Scalar problems return one field, vector problems two.
pub fn solve_closure(
    mesh: &TriMesh,
    per: &PeriodicMap,
    problem: ClosureProblem,
    groups: &DimGroups,
    geom: &UnitCellGeom,
    cfg: &ClosureConfig,
) -> Result<Vec<ClosureField>> {
    let region = problem.region();
    let area_h = mesh.region_area(region);
    if area_h <= 0.0 {
        return Err(Error::Mesh(format!("closure {}: empty region", problem.name())));
    }
    let fr = &geom.fractions;
    let d = dof_map(mesh, per, region);
    let (map, n) = region_dofs(&d, region);
    let m = lumped_mass(mesh, map, n, region);
    let k_coeff = match region {
        Region::Packing => cfg.k_p,
        Region::Cell => cfg.k_c * groups.varrho * groups.varsigma,
    };
    let mut kt = Triplets::new(n);
    add_diffusion(&mut kt, mesh, Some(region), map, |_, _| iso(k_coeff), 1.0);
    let k = kt.build();

    let check = |compat: f64, scale: f64| -> Result<()> {
        let rel = compat.abs() / scale.max(1e-300);
        if rel > COMPAT_TOL && compat.abs() > COMPAT_TOL {
            Err(Error::Compatibility { problem: problem.name(), residual: rel })
        } else {
            Ok(())
        }
    };

    let scalar = |vol_total: f64, tag: FacetTag, flux: f64| -> Result<Vec<ClosureField>> {
        // Weak form: ∫ k∇χ·∇v = (total/|B|) ∫ v − flux ∫_Γ v, with the
        // volume part rescaled to integrate to `total` on the mesh.
        let mut b = vec![0.0; n];
        add_load(&mut b, mesh, Some(region), map, |_| 1.0, vol_total / area_h);
        add_boundary_load(&mut b, mesh, tag, map, |_| 1.0, -flux);
        let scale: f64 = b.iter().map(|v| v.abs()).sum();
        let (x, compat) = solve_constrained(&k, &b, &m)?;
        check(compat, scale)?;
        Ok(vec![field(mesh, map, &x, compat, region)])
    };

    let vector = || -> Result<Vec<ClosureField>> {
        // ∫ k∇χ_j·∇v = −∫ k ∂_j v.
        let mut out = Vec::with_capacity(2);
        for j in 0..2 {
            let mut b = vec![0.0; n];
            for t in 0..mesh.n_triangles() {
                if mesh.regions[t] != region {
                    continue;
                }
                let (g, a) = basis_gradients(mesh, t);
                for (i, &v) in mesh.triangles[t].iter().enumerate() {
                    let di = map[v];
                    if di != NO_DOF {
                        b[di] -= k_coeff * a * g[i][j];
                    }
                }
            }
            let scale: f64 = b.iter().map(|v| v.abs()).sum();
            let (x, compat) = solve_constrained(&k, &b, &m)?;
            check(compat, scale)?;
            out.push(field(mesh, map, &x, compat, region));
        }
        Ok(out)
    };

    match problem {
        ClosureProblem::P1 => {
            let total = groups.q * fr.len_pw;
            scalar(total, FacetTag::PwInterface, groups.q)
        }
        ClosureProblem::P2 => {
            let total = groups.bi_p * fr.len_pc;
            scalar(total, FacetTag::PcInterface, groups.bi_p)
        }
        ClosureProblem::C1 => {
            // Source and flux both carry ϱς; the flux is into the cell.
            let rs = groups.varrho * groups.varsigma;
            let total = -groups.bi_c * rs * fr.len_pc;
            scalar(total, FacetTag::PcInterface, -groups.bi_c * rs)
        }
        ClosureProblem::P3 | ClosureProblem::C2 => vector(),
    }
}

/// Meshes the unit cell and solves every closure problem present.
pub fn solve_all_closures(geom: &UnitCellGeom, groups: &DimGroups, cfg: &ClosureConfig) -> Result<ClosureSolutions> {
    let (mesh, periodic) = mesh_unit_cell(geom, [0.0, 0.0], 1.0, cfg.h, cfg.n_seg)?;
    let one = |p| -> Result<ClosureField> { Ok(solve_closure(&mesh, &periodic, p, groups, geom, cfg)?.remove(0)) };
    let two = |p| -> Result<[ClosureField; 2]> {
        let mut v = solve_closure(&mesh, &periodic, p, groups, geom, cfg)?;
        let b = v.pop().unwrap();
        let a = v.pop().unwrap();
        Ok([a, b])
    };
    let has_cell = mesh.region_area(Region::Cell) > 0.0;
    let p1 = one(ClosureProblem::P1)?;
    let p2 = one(ClosureProblem::P2)?;
    let p3 = two(ClosureProblem::P3)?;
    let c1 = if has_cell { Some(one(ClosureProblem::C1)?) } else { None };
    let c2 = if has_cell { Some(two(ClosureProblem::C2)?) } else { None };
    Ok(ClosureSolutions { mesh, periodic, p1, p2, p3, c1, c2 })
}

/// Evaluates the effective coefficients. `groups.r_low` is taken as the
/// reference rate for `R₄⁽ᶜ⁾`.
pub fn effective_coefficients(
    sol: &ClosureSolutions,
    geom: &UnitCellGeom,
    groups: &DimGroups,
    epsilon: f64,
    cfg: &ClosureConfig,
) -> Result<EffectiveModel> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be > 0, got {epsilon}")));
    }
    let fr = &geom.fractions;
    let m = &sol.mesh;
    let (phi_p, phi_c) = (fr.phi_p, fr.phi_c);
    let y = fr.area_y;
    let avg_grad = |f: &ClosureField, r: Region| {
        let g = gradient_integral(m, &f.values, r);
        [g[0] / y, g[1] / y]
    };
    let g_mean = |f: &ClosureField| interface_mean(m, &f.values);
    let kp = cfg.k_p;
    let kc = cfg.k_c;
    let rs = groups.varrho * groups.varsigma;

    let gp1 = avg_grad(&sol.p1, Region::Packing);
    let gp2 = avg_grad(&sol.p2, Region::Packing);
    let gp3 = [avg_grad(&sol.p3[0], Region::Packing), avg_grad(&sol.p3[1], Region::Packing)];
    let p3_g = [g_mean(&sol.p3[0]), g_mean(&sol.p3[1])];
    let p1_g = g_mean(&sol.p1);
    let p2_g = g_mean(&sol.p2);

    // (∇χ)_ij = ∂_i χ_j.
    let k_p = [
        [kp * (phi_p + gp3[0][0]), kp * gp3[1][0]],
        [kp * gp3[0][1], kp * (phi_p + gp3[1][1])],
    ];
    let bp = if fr.area_bp > 0.0 { groups.bi_p * fr.len_pc / fr.area_bp } else { 0.0 };
    let u_p = [phi_p * bp * p3_g[0] - kp * gp2[0], phi_p * bp * p3_g[1] - kp * gp2[1]];
    let r3_p = phi_p * phi_p * (if fr.area_bp > 0.0 { groups.q * fr.len_pw / (fr.area_bp * epsilon) } else { 0.0 } + bp * p1_g);
    let r4_p = [phi_p * kp * gp1[0], phi_p * kp * gp1[1]];

    let mut model = EffectiveModel {
        u_p,
        v_p: [0.0; 2],
        u_c: [0.0; 2],
        v_c: [0.0; 2],
        k_p,
        k_c: [[0.0; 2]; 2],
        r1_p: 0.0,
        r2_p: 0.0,
        r3_p,
        r4_p,
        r1_c: 0.0,
        r2_c: 0.0,
        r3_c: 0.0,
        r4_c: phi_c * phi_c * groups.varrho * groups.r_low,
        r_ref: groups.r_low,
        phi_p,
        phi_c,
        epsilon,
    };

    if let (Some(c1), Some(c2)) = (&sol.c1, &sol.c2) {
        let gc1 = avg_grad(c1, Region::Cell);
        let gc2 = [avg_grad(&c2[0], Region::Cell), avg_grad(&c2[1], Region::Cell)];
        let c1_g = g_mean(c1);
        let c2_g = [g_mean(&c2[0]), g_mean(&c2[1])];
        let bc = groups.bi_c * fr.len_pc / fr.area_bc;
        let exch = 1.0 / epsilon - c1_g + p2_g;

        model.v_p = [
            phi_p / phi_c * (phi_p * bp * c2_g[0] - kp * gp2[0]),
            phi_p / phi_c * (phi_p * bp * c2_g[1] - kp * gp2[1]),
        ];
        model.r1_p = phi_p * bp * exch;
        model.r2_p = phi_p / phi_c * model.r1_p;
        model.u_c = [rs * (phi_c * bc * c2_g[0] + kc * gc1[0]), rs * (phi_c * bc * c2_g[1] + kc * gc1[1])];
        model.v_c = [
            phi_c / phi_p * rs * (phi_c * bc * p3_g[0] + kc * gc1[0]),
            phi_c / phi_p * rs * (phi_c * bc * p3_g[1] + kc * gc1[1]),
        ];
        model.k_c = [
            [rs * kc * (phi_c + gc2[0][0]), rs * kc * gc2[1][0]],
            [rs * kc * gc2[0][1], rs * kc * (phi_c + gc2[1][1])],
        ];
        model.r2_c = phi_c * bc * rs * exch;
        model.r1_c = phi_c / phi_p * model.r2_c;
        model.r3_c = phi_c * phi_c * bc * rs * p1_g;
    }
    Ok(model)
}

/// Sigmoid weight of the burning branch.
#[inline]
pub fn burn_weight(x: f64, scenario: &ScenarioConfig) -> f64 {
    let z = scenario.gamma * (x - scenario.x_burn);
    if z > 700.0 { 0.0 } else { 1.0 / (1.0 + libm::exp(z)) }
}

/// Homogenized source Π̄ at the averaged cell temperature `tc_avg`.
pub fn homogenized_pi(tc_avg: f64, x: f64, model: &EffectiveModel, params: &SourceParams, scenario: &ScenarioConfig) -> f64 {
    let t = tc_avg / model.phi_c;
    let w = burn_weight(x, scenario);
    w * params.pi_fb(t) + (1.0 - w) * params.pi_nb(t)
}

/// d Π̄ / d⟨T_c⟩_Y.
pub fn homogenized_pi_prime(tc_avg: f64, x: f64, model: &EffectiveModel, params: &SourceParams, scenario: &ScenarioConfig) -> f64 {
    let t = tc_avg / model.phi_c;
    let w = burn_weight(x, scenario);
    (w * params.pi_fb_prime(t) + (1.0 - w) * params.pi_nb_prime(t)) / model.phi_c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fine::{ReferenceValues, dimensionless_groups, pi_coefficients};
    use crate::geometry::{UnitCellSpec, build_pack_layout, build_unit_cell};

    fn groups(geom: &UnitCellGeom) -> DimGroups {
        let layout = build_pack_layout(geom, 20, 1).unwrap();
        dimensionless_groups(&ReferenceValues::table3(), &layout, &ScenarioConfig::accuracy()).unwrap()
    }

    fn reference(cfg: ClosureConfig) -> (UnitCellGeom, DimGroups, ClosureSolutions) {
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let gr = groups(&g);
        let s = solve_all_closures(&g, &gr, &cfg).unwrap();
        (g, gr, s)
    }

    fn coarse() -> ClosureConfig {
        ClosureConfig { h: 1.0 / 25.0, n_seg: 48, ..Default::default() }
    }

    #[test]
    fn fields_have_zero_mean_and_compatible_loads() {
        let (_, _, s) = reference(coarse());
        let all = [&s.p1, &s.p2, &s.p3[0], &s.p3[1], s.c1.as_ref().unwrap(), &s.c2.as_ref().unwrap()[0], &s.c2.as_ref().unwrap()[1]];
        for f in all {
            assert!(f.mean.abs() <= 1e-10, "{}", f.mean);
            assert!(f.compatibility.abs() <= 1e-12, "{}", f.compatibility);
            assert!(f.values.iter().any(|v| v.is_finite() && *v != 0.0));
        }
    }

    #[test]
    fn p1_is_linear_in_q() {
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let mut gr = groups(&g);
        let cfg = coarse();
        let (mesh, per) = mesh_unit_cell(&g, [0.0, 0.0], 1.0, cfg.h, cfg.n_seg).unwrap();
        let a = solve_closure(&mesh, &per, ClosureProblem::P1, &gr, &g, &cfg).unwrap().remove(0);
        gr.q *= 2.0;
        let b = solve_closure(&mesh, &per, ClosureProblem::P1, &gr, &g, &cfg).unwrap().remove(0);
        for (x, y) in a.values.iter().zip(&b.values) {
            if x.is_finite() {
                assert!((2.0 * x - y).abs() <= 1e-9 * x.abs().max(1e-6));
            }
        }
    }

    #[test]
    fn circle_free_cell_has_trivial_coefficients() {
        let mut spec = UnitCellSpec::reference();
        spec.r_c = 0.0;
        spec.r_w = 0.0;
        let g = build_unit_cell(spec).unwrap();
        let mut gr = groups(&build_unit_cell(UnitCellSpec::reference()).unwrap());
        gr.q = 1e-5;
        let cfg = coarse();
        let s = solve_all_closures(&g, &gr, &cfg).unwrap();
        assert!(s.c1.is_none() && s.c2.is_none());
        for f in &s.p3 {
            assert!(f.values.iter().all(|v| v.abs() < 1e-12));
        }
        let m = effective_coefficients(&s, &g, &gr, 0.05, &cfg).unwrap();
        assert!((m.k_p[0][0] - 1.0).abs() < 1e-12 && (m.k_p[1][1] - 1.0).abs() < 1e-12);
        assert!(m.k_p[0][1].abs() < 1e-12);
        assert_eq!(m.u_p, [0.0, 0.0]);
        assert_eq!(m.v_p, [0.0, 0.0]);
        for r in [m.r1_p, m.r2_p, m.r3_p, m.r1_c, m.r2_c, m.r3_c, m.r4_p[0], m.r4_p[1]] {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_identities_and_bounds() {
        let cfg = coarse();
        let (g, gr, s) = reference(cfg);
        let m = effective_coefficients(&s, &g, &gr, 0.05, &cfg).unwrap();
        assert!((m.r2_p - m.phi_p / m.phi_c * m.r1_p).abs() <= 1e-12 * m.r2_p.abs());
        assert!((m.r1_c - m.phi_c / m.phi_p * m.r2_c).abs() <= 1e-12 * m.r1_c.abs());
        assert!((m.phi_c - 0.235_619_449).abs() < 1e-8);
        assert!((m.r4_c - 1.110_330_495).abs() < 1e-6, "{}", m.r4_c);
        for k in [m.k_p, m.k_c] {
            assert!((k[0][1] - k[1][0]).abs() <= 1e-10);
        }
        for i in 0..2 {
            assert!(m.k_p[i][i] > 0.0 && m.k_p[i][i] <= m.phi_p * cfg.k_p);
            let voigt = gr.varrho * gr.varsigma * cfg.k_c * m.phi_c;
            assert!(m.k_c[i][i] > 0.0 && m.k_c[i][i] < voigt);
        }
        assert!(m.r1_p > 0.0 && m.r3_p > 0.0);
        assert!(effective_coefficients(&s, &g, &gr, 0.0, &cfg).is_err());
    }

    #[test]
    fn conductivity_stable_under_circle_refinement() {
        let base = ClosureConfig { h: 1.0 / 30.0, n_seg: 64, ..Default::default() };
        let (g, gr, s64) = reference(base);
        let m64 = effective_coefficients(&s64, &g, &gr, 0.05, &base).unwrap();
        let fine = ClosureConfig { n_seg: 128, ..base };
        let (_, _, s128) = reference(fine);
        let m128 = effective_coefficients(&s128, &g, &gr, 0.05, &fine).unwrap();
        for i in 0..2 {
            let rel = (m64.k_p[i][i] - m128.k_p[i][i]).abs() / m128.k_p[i][i];
            assert!(rel <= 0.01, "{rel}");
        }
    }

    #[test]
    fn homogenized_source_examples() {
        let p = pi_coefficients(&ReferenceValues::table3()).unwrap();
        let sc = ScenarioConfig::accuracy();
        let cfg = coarse();
        let (g, gr, s) = reference(cfg);
        let m = effective_coefficients(&s, &g, &gr, 0.05, &cfg).unwrap();
        let tc = m.phi_c * 0.5;
        let nb = p.pi_nb(0.5);
        assert!((homogenized_pi(tc, sc.x_burn + 0.1, &m, &p, &sc) - nb).abs() < 1e-7);
        assert!((nb - 0.9990).abs() < 1e-4);
        let mid = homogenized_pi(tc, sc.x_burn, &m, &p, &sc);
        assert!((mid - 0.5 * (p.pi_fb(0.5) + nb)).abs() < 1e-15);
        let h = 1e-7;
        for &t in &[0.0, 0.05, 0.12, 0.2] {
            let d = (homogenized_pi(t + h, 0.19, &m, &p, &sc) - homogenized_pi(t - h, 0.19, &m, &p, &sc)) / (2.0 * h);
            assert!((d - homogenized_pi_prime(t, 0.19, &m, &p, &sc)).abs() < 1e-5 * d.abs().max(1.0));
        }
        assert_eq!(burn_weight(10.0, &sc), 0.0);
    }
}
