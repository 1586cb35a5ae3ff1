//! P1 assembly into triplet lists. Each routine takes a vertex → DOF map so
//! that region-restricted fields can share one global system; vertices
//! mapped to [`NO_DOF`] are skipped.

use alloc::vec::Vec;

use super::dof::NO_DOF;
use super::sparse::{Csr, Triplets};
use crate::mesh::{FacetTag, Region, TriMesh};
use crate::Point;

/// Symmetric 2×2 tensor.
pub type Tensor = [[f64; 2]; 2];

pub fn iso(k: f64) -> Tensor {
    [[k, 0.0], [0.0, k]]
}

/// Degree-2 triangle rule on edge midpoints: barycentric points, weight 1/3 each.
pub const QUAD3: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];

/// Two-point Gauss rule on [0, 1]: positions and weights.
pub const GAUSS2: [(f64, f64); 2] = [(0.211_324_865_405_187_1, 0.5), (0.788_675_134_594_812_9, 0.5)];

#[inline]
fn in_region(mesh: &TriMesh, t: usize, region: Option<Region>) -> bool {
    region.map(|r| mesh.regions[t] == r).unwrap_or(true)
}

/// Gradients of the three P1 basis functions and the triangle area.
pub fn basis_gradients(mesh: &TriMesh, t: usize) -> ([[f64; 2]; 3], f64) {
    let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let g = [
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ];
    (g, 0.5 * det)
}

/// Gradient of the P1 interpolant of nodal values `u` on triangle `t`.
pub fn gradient(mesh: &TriMesh, t: usize, u: &[f64]) -> [f64; 2] {
    let (g, _) = basis_gradients(mesh, t);
    let tri = mesh.triangles[t];
    let mut out = [0.0; 2];
    for i in 0..3 {
        out[0] += g[i][0] * u[tri[i]];
        out[1] += g[i][1] * u[tri[i]];
    }
    out
}

#[inline]
pub fn bary_point(mesh: &TriMesh, t: usize, l: [f64; 3]) -> Point {
    let p = mesh.triangles[t].map(|v| mesh.vertices[v]);
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}

/// `scale · ∫ (K ∇u)·∇v` with `K` sampled at the centroid.
pub fn add_diffusion(
    out: &mut Triplets,
    mesh: &TriMesh,
    region: Option<Region>,
    map: &[usize],
    coeff: impl Fn(usize, Point) -> Tensor,
    scale: f64,
) {
    for t in 0..mesh.triangles.len() {
        if !in_region(mesh, t, region) {
            continue;
        }
        let (g, area) = basis_gradients(mesh, t);
        let k = coeff(t, mesh.centroid(t));
        let tri = mesh.triangles[t];
        for i in 0..3 {
            let di = map[tri[i]];
            if di == NO_DOF {
                continue;
            }
            let kg = [k[0][0] * g[i][0] + k[0][1] * g[i][1], k[1][0] * g[i][0] + k[1][1] * g[i][1]];
            for j in 0..3 {
                let dj = map[tri[j]];
                if dj == NO_DOF {
                    continue;
                }
                out.push(dj, di, scale * area * (kg[0] * g[j][0] + kg[1] * g[j][1]));
            }
        }
    }
}

/// `scale · ∫ c u v`, consistent P1 mass with `c` at the centroid.
pub fn add_mass(out: &mut Triplets, mesh: &TriMesh, region: Option<Region>, map: &[usize], coeff: impl Fn(Point) -> f64, scale: f64) {
    for t in 0..mesh.triangles.len() {
        if !in_region(mesh, t, region) {
            continue;
        }
        let area = mesh.area(t);
        let c = coeff(mesh.centroid(t)) * scale * area / 12.0;
        let tri = mesh.triangles[t];
        for i in 0..3 {
            let di = map[tri[i]];
            if di == NO_DOF {
                continue;
            }
            for j in 0..3 {
                let dj = map[tri[j]];
                if dj == NO_DOF {
                    continue;
                }
                out.push(di, dj, if i == j { 2.0 * c } else { c });
            }
        }
    }
}

/// `scale · ∫ (U·∇u) v` with `U` sampled at the centroid.
pub fn add_advection(
    out: &mut Triplets,
    mesh: &TriMesh,
    region: Option<Region>,
    map: &[usize],
    velocity: impl Fn(Point) -> [f64; 2],
    scale: f64,
) {
    for t in 0..mesh.triangles.len() {
        if !in_region(mesh, t, region) {
            continue;
        }
        let (g, area) = basis_gradients(mesh, t);
        let u = velocity(mesh.centroid(t));
        let tri = mesh.triangles[t];
        for j in 0..3 {
            let dj = map[tri[j]];
            if dj == NO_DOF {
                continue;
            }
            let a = scale * (u[0] * g[j][0] + u[1] * g[j][1]) * area / 3.0;
            for i in 0..3 {
                let di = map[tri[i]];
                if di != NO_DOF {
                    out.push(di, dj, a);
                }
            }
        }
    }
}

/// `coeff · ∫_Γ u v` over facets tagged `tag` with measure corrections;
/// rows are tested with `rows`, trial functions taken from `cols`.
pub fn add_boundary_mass(out: &mut Triplets, mesh: &TriMesh, tag: FacetTag, rows: &[usize], cols: &[usize], coeff: f64) {
    for f in mesh.facets.iter().filter(|f| f.tag == tag) {
        let c = coeff * mesh.facet_length(f) * f.weight / 6.0;
        for i in 0..2 {
            let di = rows[f.v[i]];
            if di == NO_DOF {
                continue;
            }
            for j in 0..2 {
                let dj = cols[f.v[j]];
                if dj == NO_DOF {
                    continue;
                }
                out.push(di, dj, if i == j { 2.0 * c } else { c });
            }
        }
    }
}

/// `rhs += scale · ∫ f v` with the three-point rule.
pub fn add_load(rhs: &mut [f64], mesh: &TriMesh, region: Option<Region>, map: &[usize], f: impl Fn(Point) -> f64, scale: f64) {
    for t in 0..mesh.triangles.len() {
        if !in_region(mesh, t, region) {
            continue;
        }
        let area = mesh.area(t);
        let tri = mesh.triangles[t];
        for l in QUAD3 {
            let fv = f(bary_point(mesh, t, l)) * scale * area / 3.0;
            for i in 0..3 {
                let d = map[tri[i]];
                if d != NO_DOF {
                    rhs[d] += fv * l[i];
                }
            }
        }
    }
}

/// `rhs += scale · ∫_Γ g v` over facets tagged `tag` (two-point Gauss,
/// measure-corrected).
pub fn add_boundary_load(rhs: &mut [f64], mesh: &TriMesh, tag: FacetTag, map: &[usize], g: impl Fn(Point) -> f64, scale: f64) {
    for f in mesh.facets.iter().filter(|f| f.tag == tag) {
        let a = mesh.vertices[f.v[0]];
        let b = mesh.vertices[f.v[1]];
        let len = mesh.facet_length(f) * f.weight * scale;
        for (s, w) in GAUSS2 {
            let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let gv = g(p) * w * len;
            let d0 = map[f.v[0]];
            let d1 = map[f.v[1]];
            if d0 != NO_DOF {
                rhs[d0] += gv * (1.0 - s);
            }
            if d1 != NO_DOF {
                rhs[d1] += gv * s;
            }
        }
    }
}

/// `rhs += scale · ∫_Γ g v` for `g` given by nodal values (P1 along facets).
pub fn add_boundary_load_nodal(rhs: &mut [f64], mesh: &TriMesh, tag: FacetTag, map: &[usize], g: &[f64], scale: f64) {
    for f in mesh.facets.iter().filter(|f| f.tag == tag) {
        let c = scale * mesh.facet_length(f) * f.weight / 6.0;
        let (g0, g1) = (g[f.v[0]], g[f.v[1]]);
        let d0 = map[f.v[0]];
        let d1 = map[f.v[1]];
        if d0 != NO_DOF {
            rhs[d0] += c * (2.0 * g0 + g1);
        }
        if d1 != NO_DOF {
            rhs[d1] += c * (g0 + 2.0 * g1);
        }
    }
}

/// Identity vertex map (every vertex is its own DOF).
pub fn identity_map(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Region-restricted vertex map numbering only vertices touching `region`.
pub fn region_map(mesh: &TriMesh, region: Region) -> (Vec<usize>, usize) {
    let mut map = alloc::vec![NO_DOF; mesh.vertices.len()];
    let mut n = 0;
    for (tri, r) in mesh.triangles.iter().zip(&mesh.regions) {
        if *r != region {
            continue;
        }
        for &v in tri {
            if map[v] == NO_DOF {
                map[v] = n;
                n += 1;
            }
        }
    }
    (map, n)
}

fn built(n: usize, f: impl FnOnce(&mut Triplets)) -> Csr {
    let mut t = Triplets::new(n);
    f(&mut t);
    t.build()
}

pub fn assemble_diffusion(mesh: &TriMesh, region: Option<Region>, map: &[usize], n: usize, coeff: impl Fn(usize, Point) -> Tensor) -> Csr {
    built(n, |t| add_diffusion(t, mesh, region, map, coeff, 1.0))
}

pub fn assemble_mass(mesh: &TriMesh, region: Option<Region>, map: &[usize], n: usize, coeff: impl Fn(Point) -> f64) -> Csr {
    built(n, |t| add_mass(t, mesh, region, map, coeff, 1.0))
}

pub fn assemble_advection(mesh: &TriMesh, region: Option<Region>, map: &[usize], n: usize, velocity: impl Fn(Point) -> [f64; 2]) -> Csr {
    built(n, |t| add_advection(t, mesh, region, map, velocity, 1.0))
}

pub fn assemble_boundary_mass(mesh: &TriMesh, tag: FacetTag, map: &[usize], n: usize, coeff: f64) -> Csr {
    built(n, |t| add_boundary_mass(t, mesh, tag, map, map, coeff))
}

pub fn assemble_boundary_load(mesh: &TriMesh, tag: FacetTag, map: &[usize], n: usize, g: impl Fn(Point) -> f64) -> Vec<f64> {
    let mut rhs = alloc::vec![0.0; n];
    add_boundary_load(&mut rhs, mesh, tag, map, g, 1.0);
    rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::sparse::dot;
    use crate::geometry::{UnitCellSpec, build_unit_cell};
    use crate::mesh::{mesh_macro, mesh_unit_cell};
    use alloc::vec;
    use core::f64::consts::PI;

    fn square(h: f64) -> TriMesh {
        mesh_macro([0.0, 0.0], [1.0, 1.0], h).unwrap()
    }

    #[test]
    fn diffusion_energy_of_linear_field() {
        let m = square(0.25);
        let n = m.n_vertices();
        let map = identity_map(n);
        let k = assemble_diffusion(&m, None, &map, n, |_, _| [[2.0, 0.0], [0.0, 3.0]]);
        let u: Vec<f64> = m.vertices.iter().map(|p| p[0] + p[1]).collect();
        let e = dot(&u, &k.mul(&u));
        assert!((e - 5.0).abs() < 1e-12);
        assert!(k.asymmetry() < 1e-14);
    }

    #[test]
    fn diffusion_patch_test_interior_rows() {
        // K u = 0 at interior vertices for a linear u.
        let m = square(0.2);
        let n = m.n_vertices();
        let map = identity_map(n);
        let k = assemble_diffusion(&m, None, &map, n, |_, _| iso(1.0));
        let u: Vec<f64> = m.vertices.iter().map(|p| 3.0 * p[0] - p[1]).collect();
        let r = k.mul(&u);
        for (v, p) in m.vertices.iter().enumerate() {
            if p[0] > 1e-12 && p[0] < 1.0 - 1e-12 && p[1] > 1e-12 && p[1] < 1.0 - 1e-12 {
                assert!(r[v].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mass_single_triangle() {
        let m = TriMesh {
            vertices: vec![[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            regions: vec![Region::Packing],
            facets: vec![],
        };
        let a = m.area(0);
        let mm = assemble_mass(&m, None, &identity_map(3), 3, |_| 1.0);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { a / 6.0 } else { a / 12.0 };
                assert!((mm.get(i, j) - e).abs() < 1e-15);
            }
        }
        let z = assemble_mass(&m, None, &identity_map(3), 3, |_| 0.0);
        assert!(z.val.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mass_row_sums_equal_region_area() {
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let (m, _) = mesh_unit_cell(&g, [0.0, 0.0], 1.0, 0.08, 32).unwrap();
        let n = m.n_vertices();
        let map = identity_map(n);
        for r in [Region::Packing, Region::Cell] {
            let mm = assemble_mass(&m, Some(r), &map, n, |_| 2.5);
            let s: f64 = mm.row_sums().iter().sum();
            assert!((s - 2.5 * m.region_area(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn region_restriction_touches_only_region_dofs() {
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let (m, _) = mesh_unit_cell(&g, [0.0, 0.0], 1.0, 0.08, 32).unwrap();
        let (map, n) = region_map(&m, Region::Cell);
        let k = assemble_diffusion(&m, Some(Region::Cell), &map, n, |_, _| iso(1.0));
        assert_eq!(k.n, n);
        // No packing-only vertex appears.
        let (pm, _) = region_map(&m, Region::Packing);
        let only_p = (0..m.n_vertices()).filter(|&v| map[v] == NO_DOF && pm[v] != NO_DOF).count();
        assert!(only_p > 0);
        let full = assemble_diffusion(&m, Some(Region::Cell), &identity_map(m.n_vertices()), m.n_vertices(), |_, _| iso(1.0));
        for v in 0..m.n_vertices() {
            if map[v] == NO_DOF {
                assert_eq!(full.row(v).0.len(), 0);
            }
        }
    }

    #[test]
    fn boundary_load_on_circles_matches_perimeter() {
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let (m, _) = mesh_unit_cell(&g, [0.0, 0.0], 1.0, 0.08, 48).unwrap();
        let n = m.n_vertices();
        let map = identity_map(n);
        let r = assemble_boundary_load(&m, FacetTag::PcInterface, &map, n, |_| 2.0);
        let rc = g.spec.r_c / g.ell;
        assert!((r.iter().sum::<f64>() - 2.0 * 2.0 * PI * rc).abs() < 1e-12);
        let z = assemble_boundary_load(&m, FacetTag::PcInterface, &map, n, |_| 0.0);
        assert!(z.iter().all(|&v| v == 0.0));
        let mut nodal = vec![0.0; n];
        add_boundary_load_nodal(&mut nodal, &m, FacetTag::PcInterface, &map, &vec![2.0; n], 1.0);
        for v in 0..n {
            assert!((nodal[v] - r[v]).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_mass_row_sums_on_straight_facet() {
        let m = square(0.1);
        let n = m.n_vertices();
        let bm = assemble_boundary_mass(&m, FacetTag::Left, &identity_map(n), n, 3.0);
        let s: f64 = bm.row_sums().iter().sum();
        assert!((s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn advection_examples() {
        let m = square(0.125);
        let n = m.n_vertices();
        let map = identity_map(n);
        let z = assemble_advection(&m, None, &map, n, |_| [0.0, 0.0]);
        assert!(z.val.iter().all(|&v| v == 0.0));
        let a = assemble_advection(&m, None, &map, n, |_| [1.0, 0.0]);
        let u: Vec<f64> = m.vertices.iter().map(|p| p[0]).collect();
        let s: f64 = a.mul(&u).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn advection_skew_on_periodic_mesh() {
        // On a closed periodic mesh, A + Aᵀ has zero row sums for constant U.
        let g = build_unit_cell(UnitCellSpec::reference()).unwrap();
        let (m, per) = mesh_unit_cell(&g, [0.0, 0.0], 1.0, 0.08, 32).unwrap();
        let d = crate::fem::DofMap::new(&m, Some(&per), true, false);
        let a = assemble_advection(&m, Some(Region::Packing), &d.tp, d.n_tp, |_| [0.7, -0.3]);
        // Pipe holes contribute boundary terms; restrict to a mesh without them.
        let mut s = UnitCellSpec::reference();
        s.r_w = 0.0;
        let g0 = build_unit_cell(s).unwrap();
        let (m0, per0) = mesh_unit_cell(&g0, [0.0, 0.0], 1.0, 0.08, 32).unwrap();
        let d0 = crate::fem::DofMap::new(&m0, Some(&per0), true, false);
        let full = crate::mesh::TriMesh { regions: vec![Region::Packing; m0.n_triangles()], ..m0.clone() };
        let a0 = assemble_advection(&full, None, &d0.tp, d0.n_tp, |_| [0.7, -0.3]);
        let sym = a0.lin_comb(1.0, &a0.transpose(), 1.0).unwrap();
        for r in sym.row_sums() {
            assert!(r.abs() < 1e-13);
        }
        assert!(a.nnz() > 0);
    }

    #[test]
    fn manufactured_solution_order() {
        use crate::fem::solve::{Method, solve_linear};
        let mut errs = Vec::new();
        for &nh in &[8usize, 16, 32] {
            let m = square(1.0 / nh as f64);
            let n = m.n_vertices();
            let map = identity_map(n);
            let k = assemble_diffusion(&m, None, &map, n, |_, _| iso(1.0));
            let mut b = vec![0.0; n];
            add_load(&mut b, &m, None, &map, |p| 2.0 * PI * PI * libm::sin(PI * p[0]) * libm::sin(PI * p[1]), 1.0);
            // Dirichlet u = 0 by row replacement.
            let mut t = Triplets::new(n);
            let bnd: Vec<bool> = m.vertices.iter().map(|p| p[0] < 1e-12 || p[1] < 1e-12 || p[0] > 1.0 - 1e-12 || p[1] > 1.0 - 1e-12).collect();
            for i in 0..n {
                if bnd[i] {
                    t.push(i, i, 1.0);
                    b[i] = 0.0;
                    continue;
                }
                let (c, v) = k.row(i);
                for (&j, &x) in c.iter().zip(v) {
                    if !bnd[j] {
                        t.push(i, j, x);
                    }
                }
            }
            let u = solve_linear(&t.build(), &b, Method::Iterative, 1e-12).unwrap();
            let mm = assemble_mass(&m, None, &map, n, |_| 1.0);
            let e: Vec<f64> = m.vertices.iter().zip(&u).map(|(p, ui)| ui - libm::sin(PI * p[0]) * libm::sin(PI * p[1])).collect();
            errs.push(libm::sqrt(dot(&e, &mm.mul(&e))));
        }
        for w in errs.windows(2) {
            assert!(libm::log2(w[0] / w[1]) >= 1.8, "{errs:?}");
        }
    }
}
