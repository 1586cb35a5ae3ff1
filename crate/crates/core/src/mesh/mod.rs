//! P1 triangle meshes: tagged unit cells, tiled fine subdomains, structured
//! macro meshes and a bucket point locator.

mod cdt;
mod locate;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::{CircleKind, PackLayout, UnitCellGeom};
use crate::{Error, Point, Result};

pub use locate::Locator;

const MIN_ANGLE_DEG: f64 = 22.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Packing,
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FacetTag {
    PcInterface,
    PwInterface,
    Left,
    Right,
    Top,
    Bottom,
    Coupling,
}

impl FacetTag {
    pub const ALL: [FacetTag; 7] = [
        FacetTag::PcInterface,
        FacetTag::PwInterface,
        FacetTag::Left,
        FacetTag::Right,
        FacetTag::Top,
        FacetTag::Bottom,
        FacetTag::Coupling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FacetTag::PcInterface => "pc",
            FacetTag::PwInterface => "pw",
            FacetTag::Left => "left",
            FacetTag::Right => "right",
            FacetTag::Top => "top",
            FacetTag::Bottom => "bottom",
            FacetTag::Coupling => "coupling",
        }
    }

    pub fn from_name(s: &str) -> Option<FacetTag> {
        FacetTag::ALL.into_iter().find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    pub v: [usize; 2],
    pub tag: FacetTag,
    /// Measure correction applied in boundary integrals (1 for straight edges).
    pub weight: f64,
}

/// Periodic vertex pairs `(master, slave)`: x-pairs match left to right,
/// y-pairs match bottom to top.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeriodicMap {
    pub x_pairs: Vec<(usize, usize)>,
    pub y_pairs: Vec<(usize, usize)>,
    pub period: [f64; 2],
}

impl PeriodicMap {
    /// Copy keeping only the top/bottom identification.
    pub fn y_only(&self) -> PeriodicMap {
        PeriodicMap { x_pairs: Vec::new(), y_pairs: self.y_pairs.clone(), period: self.period }
    }

    /// Representative vertex for every vertex once both axes are identified.
    /// Corners all collapse to one class.
    pub fn masters(&self, n: usize) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b) in self.x_pairs.iter().chain(self.y_pairs.iter()) {
            let ra = find(&mut parent, a);
            let rb = find(&mut parent, b);
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent[hi] = lo;
            }
        }
        (0..n).map(|i| find(&mut parent, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub facets: Vec<Facet>,
}

impl TriMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t` (positive for counter-clockwise).
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn region_area(&self, r: Region) -> f64 {
        (0..self.triangles.len()).filter(|&t| self.regions[t] == r).map(|t| self.area(t)).sum()
    }

    pub fn facet_length(&self, f: &Facet) -> f64 {
        let a = self.vertices[f.v[0]];
        let b = self.vertices[f.v[1]];
        libm::hypot(b[0] - a[0], b[1] - a[1])
    }

    /// Total length of facets with `tag`, optionally weighted.
    pub fn facet_measure(&self, tag: FacetTag, weighted: bool) -> f64 {
        self.facets
            .iter()
            .filter(|f| f.tag == tag)
            .map(|f| self.facet_length(f) * if weighted { f.weight } else { 1.0 })
            .sum()
    }

    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Checks orientation, edge manifoldness and facet placement.
    pub fn validate(&self) -> Result<()> {
        if self.triangles.len() != self.regions.len() {
            return Err(Error::Mesh("region tags do not cover every triangle".into()));
        }
        for t in 0..self.triangles.len() {
            if !(self.area(t) > 0.0) {
                return Err(Error::Mesh(format!("triangle {t} has non-positive area")));
            }
        }
        let edges = self.edge_map();
        let mut boundary: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (&e, ts) in &edges {
            if ts.len() > 2 {
                return Err(Error::Mesh(format!("edge {e:?} shared by {} triangles", ts.len())));
            }
            if ts.len() == 1 {
                boundary.insert(e, ts[0]);
            }
        }
        for f in &self.facets {
            let k = edge_key(f.v[0], f.v[1]);
            let ts = edges.get(&k).ok_or_else(|| Error::Mesh(format!("facet {:?} is not a mesh edge", f.v)))?;
            match f.tag {
                FacetTag::PcInterface => {
                    let ok = ts.len() == 2 && self.regions[ts[0]] != self.regions[ts[1]];
                    if !ok {
                        return Err(Error::Mesh(format!("pc facet {:?} does not separate packing and cell", f.v)));
                    }
                }
                _ => {
                    if ts.len() != 1 || self.regions[ts[0]] != Region::Packing {
                        return Err(Error::Mesh(format!("{} facet {:?} is not a packing boundary edge", f.tag.name(), f.v)));
                    }
                }
            }
        }
        // Every boundary edge must carry a facet.
        let tagged: BTreeMap<(usize, usize), ()> = self.facets.iter().map(|f| (edge_key(f.v[0], f.v[1]), ())).collect();
        for e in boundary.keys() {
            if !tagged.contains_key(e) {
                return Err(Error::Mesh(format!("boundary edge {e:?} has no facet tag")));
            }
        }
        Ok(())
    }

    /// Map from sorted edge to adjacent triangles.
    pub fn edge_map(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut m: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for i in 0..3 {
                m.entry(edge_key(tri[i], tri[(i + 1) % 3])).or_default().push(t);
            }
        }
        m
    }

    /// Retags facets with `from` tag lying on x = `x` as `to`.
    pub fn retag_vertical(&mut self, from: FacetTag, x: f64, to: FacetTag) -> usize {
        let mut n = 0;
        for f in &mut self.facets {
            if f.tag == from {
                let a = self.vertices[f.v[0]];
                let b = self.vertices[f.v[1]];
                if (a[0] - x).abs() < 1e-12 && (b[0] - x).abs() < 1e-12 {
                    f.tag = to;
                    n += 1;
                }
            }
        }
        n
    }
}

#[inline]
fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b { (a, b) } else { (b, a) }
}

/// Arc-to-chord measure correction for an inscribed regular n-gon.
pub fn polygon_weight(n_seg: usize) -> f64 {
    let n = n_seg as f64;
    (PI / n) / libm::sin(PI / n)
}

/// Unit-cell mesh in local coordinates `[0, w] × [0, w a]`.
struct LocalCell {
    mesh: TriMesh,
    w: f64,
    hgt: f64,
    /// Vertices on each side sorted along the side.
    left: Vec<usize>,
    right: Vec<usize>,
    bottom: Vec<usize>,
    top: Vec<usize>,
}

fn mesh_local_cell(geom: &UnitCellGeom, w: f64, h: f64, n_seg: usize) -> Result<LocalCell> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Mesh(format!("target edge length must be > 0, got {h}")));
    }
    if n_seg < 16 || n_seg % 2 != 0 {
        return Err(Error::Mesh(format!("n_seg must be even and >= 16, got {n_seg}")));
    }
    let hgt = w * geom.a;
    let circles = geom.circles_in([0.0, 0.0], w);
    let out = cdt::triangulate([0.0, 0.0], [w, hgt], &circles, h, n_seg, MIN_ANGLE_DEG)?;

    // Keep vertices referenced by non-hole triangles.
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    for (tri, inside) in out.triangles.iter().zip(&out.inside) {
        let region = match inside {
            None => Region::Packing,
            Some(ci) => match circles[*ci].kind {
                CircleKind::Cell => Region::Cell,
                CircleKind::Pipe => continue,
            },
        };
        triangles.push(*tri);
        regions.push(region);
    }
    let mut used = vec![usize::MAX; out.points.len()];
    let mut vertices = Vec::new();
    for tri in &mut triangles {
        for v in tri.iter_mut() {
            if used[*v] == usize::MAX {
                used[*v] = vertices.len();
                vertices.push(out.points[*v]);
            }
            *v = used[*v];
        }
    }
    let wgt = polygon_weight(n_seg);
    let mut facets = Vec::new();
    for &([a, b], kind) in &out.segments {
        if used[a] == usize::MAX || used[b] == usize::MAX {
            return Err(Error::Mesh("constraint segment lost during hole removal".into()));
        }
        let (tag, weight) = match kind {
            cdt::SegKind::Side(cdt::Side::Left) => (FacetTag::Left, 1.0),
            cdt::SegKind::Side(cdt::Side::Right) => (FacetTag::Right, 1.0),
            cdt::SegKind::Side(cdt::Side::Top) => (FacetTag::Top, 1.0),
            cdt::SegKind::Side(cdt::Side::Bottom) => (FacetTag::Bottom, 1.0),
            cdt::SegKind::Circle(ci) => match circles[ci].kind {
                CircleKind::Cell => (FacetTag::PcInterface, wgt),
                CircleKind::Pipe => (FacetTag::PwInterface, wgt),
            },
        };
        facets.push(Facet { v: [used[a], used[b]], tag, weight });
    }
    let mesh = TriMesh { vertices, triangles, regions, facets };

    let side = |pred: &dyn Fn(Point) -> bool, coord: usize| -> Vec<usize> {
        let mut s: Vec<usize> = (0..mesh.vertices.len()).filter(|&v| pred(mesh.vertices[v])).collect();
        s.sort_by(|&a, &b| mesh.vertices[a][coord].total_cmp(&mesh.vertices[b][coord]));
        s
    };
    let left = side(&|p| p[0] == 0.0, 1);
    let right = side(&|p| p[0] == w, 1);
    let bottom = side(&|p| p[1] == 0.0, 0);
    let top = side(&|p| p[1] == hgt, 0);
    let matches = |a: &[usize], b: &[usize], c: usize| {
        a.len() == b.len() && a.iter().zip(b).all(|(&x, &y)| mesh.vertices[x][c] == mesh.vertices[y][c])
    };
    if !matches(&left, &right, 1) || !matches(&bottom, &top, 0) {
        return Err(Error::Mesh("opposite unit-cell sides carry different vertex distributions".into()));
    }
    Ok(LocalCell { mesh, w, hgt, left, right, bottom, top })
}

/// Tiles `nx × ny` copies of a local cell with lower-left corner `origin`.
/// Side vertices are shared structurally; their coordinates are snapped to
/// the exact tile boundaries.
fn tile(cell: &LocalCell, nx: usize, ny: usize, origin: Point) -> (TriMesh, PeriodicMap) {
    let lm = &cell.mesh;
    let nl = lm.vertices.len();
    let mut pos_left = vec![usize::MAX; nl];
    let mut pos_bottom = vec![usize::MAX; nl];
    let mut on_right = vec![false; nl];
    let mut on_top = vec![false; nl];
    for (k, &v) in cell.left.iter().enumerate() {
        pos_left[v] = k;
    }
    for (k, &v) in cell.bottom.iter().enumerate() {
        pos_bottom[v] = k;
    }
    for &v in &cell.right {
        on_right[v] = true;
    }
    for &v in &cell.top {
        on_top[v] = true;
    }
    let bx = |i: usize| origin[0] + i as f64 * cell.w;
    let by = |j: usize| origin[1] + j as f64 * cell.hgt;

    let mut vertices: Vec<Point> = Vec::with_capacity(nl * nx * ny);
    let mut maps: Vec<Vec<usize>> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let mut map = vec![usize::MAX; nl];
            for v in 0..nl {
                if i > 0 && pos_left[v] != usize::MAX {
                    map[v] = maps[(i - 1) + j * nx][cell.right[pos_left[v]]];
                    continue;
                }
                if j > 0 && pos_bottom[v] != usize::MAX {
                    map[v] = maps[i + (j - 1) * nx][cell.top[pos_bottom[v]]];
                    continue;
                }
                let p = lm.vertices[v];
                let x = if pos_left[v] != usize::MAX {
                    bx(i)
                } else if on_right[v] {
                    bx(i + 1)
                } else {
                    bx(i) + p[0]
                };
                let y = if pos_bottom[v] != usize::MAX {
                    by(j)
                } else if on_top[v] {
                    by(j + 1)
                } else {
                    by(j) + p[1]
                };
                map[v] = vertices.len();
                vertices.push([x, y]);
            }
            maps.push(map);
        }
    }
    let mut triangles = Vec::with_capacity(lm.triangles.len() * nx * ny);
    let mut regions = Vec::with_capacity(triangles.capacity());
    let mut facets = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let map = &maps[i + j * nx];
            for (t, tri) in lm.triangles.iter().enumerate() {
                triangles.push(tri.map(|v| map[v]));
                regions.push(lm.regions[t]);
            }
            for f in &lm.facets {
                let keep = match f.tag {
                    FacetTag::Left => i == 0,
                    FacetTag::Right => i + 1 == nx,
                    FacetTag::Bottom => j == 0,
                    FacetTag::Top => j + 1 == ny,
                    _ => true,
                };
                if keep {
                    facets.push(Facet { v: f.v.map(|v| map[v]), tag: f.tag, weight: f.weight });
                }
            }
        }
    }
    let mut per = PeriodicMap {
        x_pairs: Vec::new(),
        y_pairs: Vec::new(),
        period: [nx as f64 * cell.w, ny as f64 * cell.hgt],
    };
    for j in 0..ny {
        let ml = &maps[j * nx];
        let mr = &maps[(nx - 1) + j * nx];
        for (a, b) in cell.left.iter().zip(&cell.right) {
            let pair = (ml[*a], mr[*b]);
            if !per.x_pairs.contains(&pair) {
                per.x_pairs.push(pair);
            }
        }
    }
    for i in 0..nx {
        let mb = &maps[i];
        let mt = &maps[i + (ny - 1) * nx];
        for (a, b) in cell.bottom.iter().zip(&cell.top) {
            let pair = (mb[*a], mt[*b]);
            if !per.y_pairs.contains(&pair) {
                per.y_pairs.push(pair);
            }
        }
    }
    (TriMesh { vertices, triangles, regions, facets }, per)
}

/// Unit-cell mesh of width `width` with lower-left corner `origin`
/// (use `width = 1` for closure problems in fast-variable units).
pub fn mesh_unit_cell(geom: &UnitCellGeom, origin: Point, width: f64, h: f64, n_seg: usize) -> Result<(TriMesh, PeriodicMap)> {
    if !(width > 0.0) {
        return Err(Error::Mesh(format!("unit-cell width must be > 0, got {width}")));
    }
    let cell = mesh_local_cell(geom, width, h, n_seg)?;
    let (m, p) = tile(&cell, 1, 1, origin);
    m.validate()?;
    Ok((m, p))
}

/// Fine mesh of the pack restricted to `x_range`, whose ends must be
/// unit-cell boundaries at least one cell apart. Facets on `coupling_x` are
/// tagged [`FacetTag::Coupling`]. The returned map pairs top and bottom
/// only; left and right are physical boundaries.
pub fn mesh_subdomain(
    layout: &PackLayout,
    x_range: (f64, f64),
    h: f64,
    n_seg: usize,
    coupling_x: Option<f64>,
) -> Result<(TriMesh, PeriodicMap)> {
    let (x_lo, x_hi) = x_range;
    let k0 = layout
        .boundary_index(x_lo)
        .ok_or_else(|| Error::Mesh(format!("subdomain edge x = {x_lo} is not a unit-cell boundary")))?;
    let k1 = layout
        .boundary_index(x_hi)
        .ok_or_else(|| Error::Mesh(format!("subdomain edge x = {x_hi} is not a unit-cell boundary")))?;
    if k1 <= k0 {
        return Err(Error::Mesh(format!("subdomain [{x_lo}, {x_hi}] is narrower than one unit cell")));
    }
    if let Some(xc) = coupling_x {
        layout.validate_coupling_line(xc)?;
        if (xc - x_lo).abs() > 1e-9 && (xc - x_hi).abs() > 1e-9 {
            return Err(Error::Mesh(format!("coupling line x = {xc} is not an end of the subdomain")));
        }
    }
    let cell = mesh_local_cell(&layout.geom, layout.cell_w, h, n_seg)?;
    let (mut m, mut per) = tile(&cell, k1 - k0, layout.ny, [layout.boundary_x(k0), layout.y_min()]);
    per.x_pairs.clear();
    if let Some(xc) = coupling_x {
        let x_exact = layout.boundary_x(layout.boundary_index(xc).unwrap_or(k0));
        let from = if (xc - x_lo).abs() <= 1e-9 { FacetTag::Left } else { FacetTag::Right };
        m.retag_vertical(from, x_exact, FacetTag::Coupling);
    }
    m.validate()?;
    Ok((m, per))
}

/// Full pack mesh together with its periodic pairing.
pub fn mesh_pack(layout: &PackLayout, h: f64, n_seg: usize) -> Result<(TriMesh, PeriodicMap)> {
    let cell = mesh_local_cell(&layout.geom, layout.cell_w, h, n_seg)?;
    let (m, p) = tile(&cell, layout.nx, layout.ny, layout.origin);
    m.validate()?;
    Ok((m, p))
}

/// Pairs vertices on `Bottom` facets with `Top` vertices of equal x.
pub fn pair_top_bottom(mesh: &TriMesh) -> Result<PeriodicMap> {
    let collect = |tag: FacetTag| {
        let mut v: Vec<usize> = mesh.facets.iter().filter(|f| f.tag == tag).flat_map(|f| f.v).collect();
        v.sort_by(|&a, &b| mesh.vertices[a][0].total_cmp(&mesh.vertices[b][0]));
        v.dedup();
        v
    };
    let bottom = collect(FacetTag::Bottom);
    let top = collect(FacetTag::Top);
    if bottom.len() != top.len() || bottom.is_empty() {
        return Err(Error::Mesh(format!("{} bottom vs {} top vertices", bottom.len(), top.len())));
    }
    let mut y_pairs = Vec::with_capacity(bottom.len());
    for (&b, &t) in bottom.iter().zip(&top) {
        if (mesh.vertices[b][0] - mesh.vertices[t][0]).abs() > 1e-12 {
            return Err(Error::Mesh(format!("top/bottom vertices differ at x = {}", mesh.vertices[b][0])));
        }
        y_pairs.push((b, t));
    }
    let (lo, hi) = mesh.bounds();
    Ok(PeriodicMap { x_pairs: Vec::new(), y_pairs, period: [hi[0] - lo[0], hi[1] - lo[1]] })
}

/// Structured mesh of `[lo, hi]` with squares of side about `h`, each split
/// along its lower-left to upper-right diagonal.
pub fn mesh_macro(lo: Point, hi: Point, h: f64) -> Result<TriMesh> {
    let w = hi[0] - lo[0];
    let ht = hi[1] - lo[1];
    if !(w > 0.0 && ht > 0.0) {
        return Err(Error::Mesh(format!("degenerate macro bounds {lo:?} to {hi:?}")));
    }
    if !(h > 0.0) {
        return Err(Error::Mesh(format!("macro mesh size must be > 0, got {h}")));
    }
    let nx = libm::round(w / h).max(1.0) as usize;
    let ny = libm::round(ht / h).max(1.0) as usize;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { hi[1] } else { lo[1] + ht * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { hi[0] } else { lo[0] + w * i as f64 / nx as f64 };
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| i + j * (nx + 1);
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut facets = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        facets.push(Facet { v: [id(i, 0), id(i + 1, 0)], tag: FacetTag::Bottom, weight: 1.0 });
        facets.push(Facet { v: [id(i + 1, ny), id(i, ny)], tag: FacetTag::Top, weight: 1.0 });
    }
    for j in 0..ny {
        facets.push(Facet { v: [id(0, j + 1), id(0, j)], tag: FacetTag::Left, weight: 1.0 });
        facets.push(Facet { v: [id(nx, j), id(nx, j + 1)], tag: FacetTag::Right, weight: 1.0 });
    }
    let regions = vec![Region::Packing; triangles.len()];
    Ok(TriMesh { vertices, triangles, regions, facets })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub min_angle_deg: f64,
    /// Largest circumradius over shortest edge.
    pub max_aspect: f64,
    pub max_edge: f64,
    pub area_packing: f64,
    pub area_cell: f64,
}

pub fn mesh_quality(mesh: &TriMesh) -> Result<MeshQuality> {
    if mesh.triangles.is_empty() {
        return Err(Error::Mesh("empty mesh".into()));
    }
    let mut min_angle = f64::INFINITY;
    let mut max_aspect: f64 = 0.0;
    let mut max_edge: f64 = 0.0;
    for t in 0..mesh.triangles.len() {
        let p = mesh.triangles[t].map(|v| mesh.vertices[v]);
        let l = [0, 1, 2].map(|i| {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            libm::hypot(b[0] - a[0], b[1] - a[1])
        });
        for i in 0..3 {
            let (a, b, c) = (l[i], l[(i + 1) % 3], l[(i + 2) % 3]);
            let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
            min_angle = min_angle.min(libm::acos(cos).to_degrees());
        }
        let area = mesh.area(t);
        let r = l[0] * l[1] * l[2] / (4.0 * area);
        let lmin = l[0].min(l[1]).min(l[2]);
        max_aspect = max_aspect.max(r / lmin);
        max_edge = max_edge.max(l[0].max(l[1]).max(l[2]));
    }
    Ok(MeshQuality {
        n_vertices: mesh.vertices.len(),
        n_triangles: mesh.triangles.len(),
        min_angle_deg: min_angle,
        max_aspect,
        max_edge,
        area_packing: mesh.region_area(Region::Packing),
        area_cell: mesh.region_area(Region::Cell),
    })
}

/// Area lost when a circle of radius `r` is replaced by its inscribed n-gon.
pub fn polygon_deficit(r: f64, n_seg: usize) -> f64 {
    let n = n_seg as f64;
    PI * r * r - 0.5 * n * r * r * libm::sin(2.0 * PI / n)
}
