//! Constrained Delaunay triangulation with Ruppert refinement, specialised
//! to an axis-aligned rectangle containing polygonal circles.
//!
//! Rectangle sides are split in mirrored pairs so opposite sides always carry
//! identical vertex distributions (needed for periodic identification and
//! for tiling unit cells).

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::{Circle, CircleKind};
use crate::{Error, Point, Result};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SegKind {
    Side(Side),
    Circle(usize),
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [u32; 3],
    /// n[i] is the neighbour across the edge opposite v[i].
    n: [u32; 3],
    /// Bit i set when the edge opposite v[i] is a constrained segment.
    c: u8,
    alive: bool,
}

impl Tri {
    #[inline]
    fn edge(&self, i: usize) -> (u32, u32) {
        (self.v[(i + 1) % 3], self.v[(i + 2) % 3])
    }
}

enum Loc {
    Inside(usize),
    Blocked(usize, usize),
}

pub(crate) struct Output {
    pub points: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Index into the circle list if the triangle lies inside that circle.
    pub inside: Vec<Option<usize>>,
    pub segments: Vec<([usize; 2], SegKind)>,
}

pub(crate) struct Cdt {
    pts: Vec<Point>,
    tris: Vec<Tri>,
    segs: BTreeMap<(u32, u32), SegKind>,
    vtri: Vec<u32>,
    stamp: Vec<u32>,
    cur_stamp: u32,
    hint: usize,
    lo: Point,
    hi: Point,
}

#[inline]
fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

#[inline]
fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

#[inline]
fn key(a: u32, b: u32) -> (u32, u32) {
    if a < b { (a, b) } else { (b, a) }
}

fn circumcenter(a: Point, b: Point, c: Point) -> (Point, f64) {
    let bx = b[0] - a[0];
    let by = b[1] - a[1];
    let cx = c[0] - a[0];
    let cy = c[1] - a[1];
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    ([a[0] + ux, a[1] + uy], libm::sqrt(ux * ux + uy * uy))
}

/// Point-in-polygon for the regular `n`-gon inscribed in `c` with vertex
/// angles 2πk/n.
pub(crate) fn in_polygon(c: &Circle, n: usize, p: Point) -> bool {
    let dx = p[0] - c.center[0];
    let dy = p[1] - c.center[1];
    let r2 = dx * dx + dy * dy;
    if r2 > c.radius * c.radius {
        return false;
    }
    let apothem = c.radius * libm::cos(PI / n as f64);
    if r2 < apothem * apothem {
        return true;
    }
    let mut ang = libm::atan2(dy, dx);
    if ang < 0.0 {
        ang += 2.0 * PI;
    }
    let step = 2.0 * PI / n as f64;
    let k = ((ang / step) as usize).min(n - 1);
    let v0 = polygon_vertex(c, n, k);
    let v1 = polygon_vertex(c, n, (k + 1) % n);
    orient(v0, v1, p) > 0.0
}

#[inline]
pub(crate) fn polygon_vertex(c: &Circle, n: usize, k: usize) -> Point {
    let t = 2.0 * PI * k as f64 / n as f64;
    [c.center[0] + c.radius * libm::cos(t), c.center[1] + c.radius * libm::sin(t)]
}

impl Cdt {
    fn new(lo: Point, hi: Point) -> Self {
        let pts = vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
        // t0 = (0,1,2), t1 = (0,2,3)
        let t0 = Tri { v: [0, 1, 2], n: [NONE, 1, NONE], c: 0b101, alive: true };
        let t1 = Tri { v: [0, 2, 3], n: [NONE, NONE, 0], c: 0b011, alive: true };
        let mut segs = BTreeMap::new();
        segs.insert(key(0, 1), SegKind::Side(Side::Bottom));
        segs.insert(key(1, 2), SegKind::Side(Side::Right));
        segs.insert(key(2, 3), SegKind::Side(Side::Top));
        segs.insert(key(3, 0), SegKind::Side(Side::Left));
        Cdt { pts, tris: vec![t0, t1], segs, vtri: vec![0, 0, 0, 1], stamp: vec![0, 0], cur_stamp: 0, hint: 0, lo, hi }
    }

    #[inline]
    fn p(&self, v: u32) -> Point {
        self.pts[v as usize]
    }

    fn next_stamp(&mut self) -> u32 {
        self.cur_stamp = self.cur_stamp.wrapping_add(1);
        if self.cur_stamp == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.cur_stamp = 1;
        }
        self.cur_stamp
    }

    fn locate(&self, p: Point, start: usize) -> Result<Loc> {
        let mut t = if self.tris[start].alive { start } else { self.any_alive() };
        let mut rot = 0usize;
        let cap = 4 * self.tris.len() + 100;
        for _ in 0..cap {
            let tri = &self.tris[t];
            let mut moved = false;
            for k in 0..3 {
                let i = (k + rot) % 3;
                let (a, b) = tri.edge(i);
                if orient(self.p(a), self.p(b), p) < 0.0 {
                    if tri.c & (1 << i) != 0 || tri.n[i] == NONE {
                        return Ok(Loc::Blocked(t, i));
                    }
                    t = tri.n[i] as usize;
                    moved = true;
                    break;
                }
            }
            rot = rot.wrapping_add(1);
            if !moved {
                return Ok(Loc::Inside(t));
            }
        }
        Err(Error::Mesh("point location did not terminate".into()))
    }

    fn any_alive(&self) -> usize {
        self.tris.iter().rposition(|t| t.alive).unwrap_or(0)
    }

    /// Triangle and local edge index of the directed-or-reversed edge (a, b).
    fn find_edge(&self, a: u32, b: u32) -> Option<(usize, usize)> {
        let start = self.vtri[a as usize] as usize;
        if !self.tris[start].alive {
            return self.find_edge_slow(a, b);
        }
        // Rotate around a in both directions.
        for dir in 0..2 {
            let mut t = start;
            for _ in 0..64 {
                let tri = &self.tris[t];
                let ia = match tri.v.iter().position(|&v| v == a) {
                    Some(i) => i,
                    None => return self.find_edge_slow(a, b),
                };
                for i in 0..3 {
                    let (x, y) = tri.edge(i);
                    if (x == a && y == b) || (x == b && y == a) {
                        return Some((t, i));
                    }
                }
                // Edge (a, v[ia+1]) is opposite v[ia+2]; edge (v[ia+2], a) is opposite v[ia+1].
                let nxt = if dir == 0 { tri.n[(ia + 2) % 3] } else { tri.n[(ia + 1) % 3] };
                if nxt == NONE {
                    break;
                }
                t = nxt as usize;
                if t == start {
                    break;
                }
            }
        }
        self.find_edge_slow(a, b)
    }

    fn find_edge_slow(&self, a: u32, b: u32) -> Option<(usize, usize)> {
        for (t, tri) in self.tris.iter().enumerate() {
            if !tri.alive {
                continue;
            }
            for i in 0..3 {
                let (x, y) = tri.edge(i);
                if (x == a && y == b) || (x == b && y == a) {
                    return Some((t, i));
                }
            }
        }
        None
    }

    fn set_constrained(&mut self, a: u32, b: u32, kind: SegKind) -> bool {
        match self.find_edge(a, b) {
            Some((t, i)) => {
                self.tris[t].c |= 1 << i;
                let nb = self.tris[t].n[i];
                if nb != NONE {
                    let nb = nb as usize;
                    for j in 0..3 {
                        if self.tris[nb].n[j] == t as u32 {
                            self.tris[nb].c |= 1 << j;
                        }
                    }
                }
                self.segs.insert(key(a, b), kind);
                true
            }
            None => false,
        }
    }

    /// Cavity of triangles whose circumcircle contains `p`, grown from
    /// `seeds` without crossing constraints (except `open`). Returns the
    /// cavity and its boundary edges (a, b, outer neighbour, constrained).
    fn cavity(&mut self, p: Point, seeds: &[usize], open: Option<(u32, u32)>) -> (Vec<usize>, Vec<(u32, u32, u32, bool)>) {
        let s = self.next_stamp();
        if self.stamp.len() < self.tris.len() {
            self.stamp.resize(self.tris.len(), 0);
        }
        let mut cav: Vec<usize> = Vec::with_capacity(16);
        for &t in seeds {
            self.stamp[t] = s;
            cav.push(t);
        }
        let is_open = |a: u32, b: u32| open.map(|(x, y)| key(x, y) == key(a, b)).unwrap_or(false);
        let mut k = 0;
        while k < cav.len() {
            let t = cav[k];
            k += 1;
            for i in 0..3 {
                let tri = self.tris[t];
                let (a, b) = tri.edge(i);
                if tri.c & (1 << i) != 0 && !is_open(a, b) {
                    continue;
                }
                let nb = tri.n[i];
                if nb == NONE || self.stamp[nb as usize] == s {
                    continue;
                }
                let nt = self.tris[nb as usize];
                if incircle(self.p(nt.v[0]), self.p(nt.v[1]), self.p(nt.v[2]), p) > 0.0 {
                    self.stamp[nb as usize] = s;
                    cav.push(nb as usize);
                }
            }
        }
        // Shrink until star-shaped with respect to p.
        loop {
            let mut bnd = Vec::with_capacity(cav.len() + 2);
            let mut bad: Option<usize> = None;
            'outer: for &t in &cav {
                let tri = self.tris[t];
                for i in 0..3 {
                    let nb = tri.n[i];
                    let (a, b) = tri.edge(i);
                    if nb != NONE && self.stamp[nb as usize] == s {
                        continue;
                    }
                    if nb == NONE && is_open(a, b) {
                        continue;
                    }
                    let o = orient(self.p(a), self.p(b), p);
                    let scale = dist2p(self.p(a), self.p(b));
                    if o <= 1e-13 * scale {
                        if !seeds.contains(&t) {
                            bad = Some(t);
                            break 'outer;
                        }
                    }
                    bnd.push((a, b, nb, tri.c & (1 << i) != 0));
                }
            }
            match bad {
                Some(t) => {
                    self.stamp[t] = 0;
                    cav.retain(|&x| x != t);
                }
                None => return (cav, bnd),
            }
        }
    }

    /// Inserts `p` into the cavity grown from `seeds`. When `split` is set the
    /// point lies on that segment, which is replaced by two halves.
    fn insert(&mut self, p: Point, seeds: &[usize], split: Option<(u32, u32)>) -> u32 {
        let (cav, bnd) = self.cavity(p, seeds, split);
        let pi = self.pts.len() as u32;
        self.pts.push(p);
        self.vtri.push(NONE);
        let first_new = self.tris.len();
        for &(a, b, nb, cons) in &bnd {
            let t = self.tris.len() as u32;
            self.tris.push(Tri { v: [a, b, pi], n: [NONE, NONE, nb], c: if cons { 0b100 } else { 0 }, alive: true });
            self.stamp.push(0);
            if nb != NONE {
                let ntri = &mut self.tris[nb as usize];
                for j in 0..3 {
                    let (x, y) = ntri.edge(j);
                    if x == b && y == a {
                        ntri.n[j] = t;
                    }
                }
            }
            self.vtri[a as usize] = t;
            self.vtri[b as usize] = t;
        }
        self.vtri[pi as usize] = first_new as u32;
        for &t in &cav {
            self.tris[t].alive = false;
        }
        // Link the fan: new tri (a, b, p) edge 0 = (b, p) pairs with the tri starting at b.
        let n_new = self.tris.len() - first_new;
        for x in 0..n_new {
            let tx = first_new + x;
            let b = self.tris[tx].v[1];
            for y in 0..n_new {
                let ty = first_new + y;
                if self.tris[ty].v[0] == b {
                    self.tris[tx].n[0] = ty as u32;
                    self.tris[ty].n[1] = tx as u32;
                    break;
                }
            }
        }
        if let Some((a, b)) = split {
            let kind = self.segs.remove(&key(a, b)).expect("split of unknown segment");
            self.segs.insert(key(a, pi), kind);
            self.segs.insert(key(pi, b), kind);
            for t in first_new..self.tris.len() {
                let tri = &mut self.tris[t];
                // edge 0 = (v1, p), edge 1 = (p, v0)
                if tri.v[1] == a || tri.v[1] == b {
                    tri.c |= 0b001;
                }
                if tri.v[0] == a || tri.v[0] == b {
                    tri.c |= 0b010;
                }
            }
        }
        self.hint = first_new;
        pi
    }

    fn insert_free(&mut self, p: Point) -> Result<u32> {
        match self.locate(p, self.hint)? {
            Loc::Inside(t) => Ok(self.insert(p, &[t], None)),
            Loc::Blocked(t, i) => {
                // p lies across a constraint from the walk; retry from scratch with a full scan.
                let _ = (t, i);
                for (k, tri) in self.tris.iter().enumerate() {
                    if !tri.alive {
                        continue;
                    }
                    let [a, b, c] = tri.v.map(|v| self.p(v));
                    if orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0 {
                        return Ok(self.insert(p, &[k], None));
                    }
                }
                Err(Error::Mesh("point outside triangulation".into()))
            }
        }
    }

    /// Splits segment (a, b) at parameter `t` in (0, 1).
    fn split_segment_at(&mut self, a: u32, b: u32, t: f64) -> Result<u32> {
        let (ti, i) = self.find_edge(a, b).ok_or_else(|| Error::Mesh("segment edge missing".into()))?;
        let pa = self.p(a);
        let pb = self.p(b);
        let p = if t == 0.5 {
            [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
        } else {
            [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
        };
        let nb = self.tris[ti].n[i];
        let seeds: Vec<usize> = if nb == NONE { vec![ti] } else { vec![ti, nb as usize] };
        Ok(self.insert(p, &seeds, Some((a, b))))
    }

    /// Splits a segment at its midpoint and mirrors side splits onto the
    /// opposite side. Returns the new segment halves.
    fn split_segment(&mut self, a: u32, b: u32) -> Result<Vec<(u32, u32)>> {
        let kind = *self.segs.get(&key(a, b)).ok_or_else(|| Error::Mesh("unknown segment".into()))?;
        let m = self.split_segment_at(a, b, 0.5)?;
        let mut out = vec![(a, m), (m, b)];
        if let SegKind::Side(side) = kind {
            let mp = self.p(m);
            let (mirror, coord, target) = match side {
                Side::Bottom => (Side::Top, 0, self.hi[1]),
                Side::Top => (Side::Bottom, 0, self.lo[1]),
                Side::Left => (Side::Right, 1, self.hi[0]),
                Side::Right => (Side::Left, 1, self.lo[0]),
            };
            let _ = target;
            let want = mp[coord];
            let found = self.segs.iter().find_map(|(&(x, y), &k)| {
                if k != SegKind::Side(mirror) {
                    return None;
                }
                let (u, v) = (self.p(x)[coord], self.p(y)[coord]);
                if want > u.min(v) && want < u.max(v) { Some((x, y)) } else { None }
            });
            if let Some((x, y)) = found {
                let m2 = self.split_segment_at(x, y, 0.5)?;
                out.push((x, m2));
                out.push((m2, y));
            }
        }
        Ok(out)
    }

    fn encroached(&self, a: u32, b: u32) -> bool {
        let (t, i) = match self.find_edge(a, b) {
            Some(x) => x,
            None => return false,
        };
        let pa = self.p(a);
        let pb = self.p(b);
        let l2 = dist2p(pa, pb);
        let check = |tri: &Tri| {
            for &v in &tri.v {
                if v == a || v == b {
                    continue;
                }
                let q = self.p(v);
                let d = (pa[0] - q[0]) * (pb[0] - q[0]) + (pa[1] - q[1]) * (pb[1] - q[1]);
                if d < -1e-12 * l2 {
                    return true;
                }
            }
            false
        };
        if check(&self.tris[t]) {
            return true;
        }
        let nb = self.tris[t].n[i];
        nb != NONE && check(&self.tris[nb as usize])
    }

    fn encroaches(&self, a: u32, b: u32, q: Point) -> bool {
        let pa = self.p(a);
        let pb = self.p(b);
        let d = (pa[0] - q[0]) * (pb[0] - q[0]) + (pa[1] - q[1]) * (pb[1] - q[1]);
        d < -1e-12 * dist2p(pa, pb)
    }

    fn output(self, circles: &[Circle], n_seg: usize) -> Output {
        let mut triangles = Vec::new();
        let mut inside = Vec::new();
        for tri in &self.tris {
            if !tri.alive {
                continue;
            }
            let [a, b, c] = tri.v.map(|v| self.p(v));
            let g = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
            let which = circles.iter().position(|cc| in_polygon(cc, n_seg, g));
            triangles.push(tri.v.map(|v| v as usize));
            inside.push(which);
        }
        let segments = self.segs.iter().map(|(&(a, b), &k)| ([a as usize, b as usize], k)).collect();
        Output { points: self.pts, triangles, inside, segments }
    }
}

#[inline]
fn dist2p(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Quality-refined conforming triangulation of `[lo, hi]` with the given
/// circles as `n_seg`-gon constraints. Triangles inside pipe polygons are
/// still returned (flagged via `inside`) and must be dropped by the caller.
pub(crate) fn triangulate(lo: Point, hi: Point, circles: &[Circle], h: f64, n_seg: usize, min_angle_deg: f64) -> Result<Output> {
    let w = hi[0] - lo[0];
    let ht = hi[1] - lo[1];
    if !(w > 0.0 && ht > 0.0 && h > 0.0) {
        return Err(Error::Mesh("degenerate rectangle or mesh size".into()));
    }
    let mut cdt = Cdt::new(lo, hi);

    // Sides: uniform, mirrored.
    let nx = libm::ceil(w / h - 1e-9).max(1.0) as usize;
    let ny = libm::ceil(ht / h - 1e-9).max(1.0) as usize;
    let corners = [0u32, 1, 2, 3];
    let _ = corners;
    // bottom: 0 -> 1, top: 3 -> 2 (same x), left: 0 -> 3, right: 1 -> 2 (same y)
    let split_side = |cdt: &mut Cdt, a: u32, b: u32, n: usize| -> Result<()> {
        let mut prev = a;
        for k in 1..n {
            // Split (prev, b) at the point that lands on a + k/n (b - a).
            let pa = cdt.p(a);
            let pb = cdt.p(b);
            let target = [pa[0] + (pb[0] - pa[0]) * k as f64 / n as f64, pa[1] + (pb[1] - pa[1]) * k as f64 / n as f64];
            let pp = cdt.p(prev);
            let len = libm::sqrt(dist2p(pp, pb));
            let t = libm::sqrt(dist2p(pp, target)) / len;
            let m = cdt.split_segment_at(prev, b, t)?;
            cdt.pts[m as usize] = target;
            prev = m;
        }
        Ok(())
    };
    split_side(&mut cdt, 0, 1, nx)?;
    split_side(&mut cdt, 3, 2, nx)?;
    split_side(&mut cdt, 0, 3, ny)?;
    split_side(&mut cdt, 1, 2, ny)?;

    // Circle polygons, edges subdivided to length <= h.
    for c in circles {
        for k in 0..n_seg {
            let p = polygon_vertex(c, n_seg, k);
            if !(p[0] > lo[0] && p[0] < hi[0] && p[1] > lo[1] && p[1] < hi[1]) {
                return Err(Error::Mesh("circle polygon leaves the rectangle".into()));
            }
        }
    }
    let mut pending: Vec<(u32, u32, SegKind)> = Vec::new();
    for (ci, c) in circles.iter().enumerate() {
        let mut ids = Vec::with_capacity(n_seg);
        let edge = 2.0 * c.radius * libm::sin(PI / n_seg as f64);
        let sub = libm::ceil(edge / h - 1e-9).max(1.0) as usize;
        for k in 0..n_seg {
            let p0 = polygon_vertex(c, n_seg, k);
            ids.push(cdt.insert_free(p0)?);
            let p1 = polygon_vertex(c, n_seg, (k + 1) % n_seg);
            for s in 1..sub {
                let t = s as f64 / sub as f64;
                ids.push(cdt.insert_free([p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])])?);
            }
        }
        for k in 0..ids.len() {
            pending.push((ids[k], ids[(k + 1) % ids.len()], SegKind::Circle(ci)));
        }
    }
    // Conforming recovery by midpoint insertion.
    let mut guard = 0usize;
    while let Some((a, b, kind)) = pending.pop() {
        guard += 1;
        if guard > 1_000_000 {
            return Err(Error::Mesh("segment recovery did not terminate".into()));
        }
        if cdt.set_constrained(a, b, kind) {
            continue;
        }
        let pa = cdt.p(a);
        let pb = cdt.p(b);
        let m = cdt.insert_free([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])])?;
        pending.push((a, m, kind));
        pending.push((m, b, kind));
    }

    refine(&mut cdt, circles, h, n_seg, min_angle_deg)?;
    Ok(cdt.output(circles, n_seg))
}

fn refine(cdt: &mut Cdt, circles: &[Circle], h: f64, n_seg: usize, min_angle_deg: f64) -> Result<()> {
    let r_max = 0.62 * h;
    let ratio = 1.0 / (2.0 * libm::sin(min_angle_deg.to_radians()));
    let min_seg = 1e-4 * h;
    let is_hole = |cdt: &Cdt, t: usize| -> bool {
        let [a, b, c] = cdt.tris[t].v.map(|v| cdt.p(v));
        let g = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        circles.iter().any(|cc| cc.kind == CircleKind::Pipe && in_polygon(cc, n_seg, g))
    };
    let mut seg_queue: Vec<(u32, u32)> = cdt.segs.keys().copied().collect();
    let mut tri_queue: Vec<usize> = (0..cdt.tris.len()).collect();
    let budget = 200 * (((cdt.hi[0] - cdt.lo[0]) * (cdt.hi[1] - cdt.lo[1]) / (h * h)) as usize + cdt.pts.len()) + 10_000;
    let mut steps = 0usize;

    loop {
        steps += 1;
        if steps > budget {
            return Err(Error::Mesh("quality refinement did not terminate".into()));
        }
        // 1. Encroached segments first.
        if let Some((a, b)) = seg_queue.pop() {
            if !cdt.segs.contains_key(&key(a, b)) {
                continue;
            }
            if cdt.encroached(a, b) && libm::sqrt(dist2p(cdt.p(a), cdt.p(b))) > min_seg {
                let before = cdt.tris.len();
                let halves = cdt.split_segment(a, b)?;
                seg_queue.extend(halves);
                tri_queue.extend(before..cdt.tris.len());
            }
            continue;
        }
        // 2. One bad triangle.
        let t = match tri_queue.pop() {
            Some(t) => t,
            None => break,
        };
        if !cdt.tris[t].alive || is_hole(cdt, t) {
            continue;
        }
        let [a, b, c] = cdt.tris[t].v.map(|v| cdt.p(v));
        let lmin = libm::sqrt(dist2p(a, b).min(dist2p(b, c)).min(dist2p(c, a)));
        let (cc, r) = circumcenter(a, b, c);
        if !(r > r_max || r / lmin > ratio) {
            continue;
        }
        match cdt.locate(cc, t)? {
            Loc::Blocked(tb, i) => {
                let (x, y) = cdt.tris[tb].edge(i);
                if cdt.segs.contains_key(&key(x, y)) {
                    if libm::sqrt(dist2p(cdt.p(x), cdt.p(y))) > min_seg {
                        let before = cdt.tris.len();
                        let halves = cdt.split_segment(x, y)?;
                        seg_queue.extend(halves);
                        tri_queue.extend(before..cdt.tris.len());
                    }
                    tri_queue.push(t);
                }
            }
            Loc::Inside(ti) => {
                let (cav, bnd) = cdt.cavity(cc, &[ti], None);
                let _ = cav;
                let enc: Vec<(u32, u32)> =
                    bnd.iter().filter(|e| e.3 && cdt.encroaches(e.0, e.1, cc)).map(|e| (e.0, e.1)).collect();
                if enc.is_empty() {
                    let before = cdt.tris.len();
                    let v = cdt.insert(cc, &[ti], None);
                    for k in before..cdt.tris.len() {
                        let tri = cdt.tris[k];
                        if tri.c & 0b100 != 0 {
                            let (x, y) = tri.edge(2);
                            if cdt.encroaches(x, y, cdt.p(v)) {
                                seg_queue.push((x, y));
                            }
                        }
                        tri_queue.push(k);
                    }
                } else {
                    for (x, y) in enc {
                        if cdt.segs.contains_key(&key(x, y)) && libm::sqrt(dist2p(cdt.p(x), cdt.p(y))) > min_seg {
                            let before = cdt.tris.len();
                            let halves = cdt.split_segment(x, y)?;
                            seg_queue.extend(halves);
                            tri_queue.extend(before..cdt.tris.len());
                        }
                    }
                    tri_queue.push(t);
                }
            }
        }
    }
    Ok(())
}
