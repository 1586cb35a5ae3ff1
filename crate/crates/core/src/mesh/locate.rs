use alloc::vec;
use alloc::vec::Vec;

use super::{Region, TriMesh};
use crate::Point;

/// Uniform-grid bucket locator for point evaluation on a fixed mesh.
#[derive(Debug, Clone)]
pub struct Locator {
    lo: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    start: Vec<u32>,
    items: Vec<u32>,
}

impl Locator {
    pub fn new(mesh: &TriMesh) -> Self {
        let (lo, hi) = mesh.bounds();
        let nt = mesh.triangles.len().max(1);
        let w = (hi[0] - lo[0]).max(1e-300);
        let h = (hi[1] - lo[1]).max(1e-300);
        // About one triangle per bucket on average.
        let target = libm::sqrt(nt as f64 * w / h).max(1.0);
        let nx = (target as usize).clamp(1, 4096);
        let ny = ((nt as f64 / nx as f64) as usize).clamp(1, 4096);
        let cell = [w / nx as f64, h / ny as f64];
        let mut counts = vec![0u32; nx * ny + 1];
        let range = |t: usize| {
            let p = mesh.triangles[t].map(|v| mesh.vertices[v]);
            let bx0 = p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min);
            let bx1 = p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max);
            let by0 = p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min);
            let by1 = p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max);
            let ix = |x: f64| (((x - lo[0]) / cell[0]) as isize).clamp(0, nx as isize - 1) as usize;
            let iy = |y: f64| (((y - lo[1]) / cell[1]) as isize).clamp(0, ny as isize - 1) as usize;
            (ix(bx0 - 1e-12), ix(bx1 + 1e-12), iy(by0 - 1e-12), iy(by1 + 1e-12))
        };
        for t in 0..mesh.triangles.len() {
            let (i0, i1, j0, j1) = range(t);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    counts[i + j * nx + 1] += 1;
                }
            }
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut items = vec![0u32; counts[nx * ny] as usize];
        let mut fill = counts.clone();
        for t in 0..mesh.triangles.len() {
            let (i0, i1, j0, j1) = range(t);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let b = i + j * nx;
                    items[fill[b] as usize] = t as u32;
                    fill[b] += 1;
                }
            }
        }
        Locator { lo, cell, dims: [nx, ny], start: counts, items }
    }

    fn bucket(&self, p: Point) -> Option<usize> {
        let fx = (p[0] - self.lo[0]) / self.cell[0];
        let fy = (p[1] - self.lo[1]) / self.cell[1];
        let eps = 1e-9;
        if fx < -eps || fy < -eps || fx > self.dims[0] as f64 + eps || fy > self.dims[1] as f64 + eps {
            return None;
        }
        let i = (fx as isize).clamp(0, self.dims[0] as isize - 1) as usize;
        let j = (fy as isize).clamp(0, self.dims[1] as isize - 1) as usize;
        Some(i + j * self.dims[0])
    }

    /// Triangle containing `p` (with a small tolerance) and barycentric
    /// weights. With `region` set, only triangles of that region match.
    pub fn find(&self, mesh: &TriMesh, p: Point, region: Option<Region>) -> Option<(usize, [f64; 3])> {
        let b = self.bucket(p)?;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.items[self.start[b] as usize..self.start[b + 1] as usize] {
            let t = t as usize;
            if let Some(r) = region {
                if mesh.regions[t] != r {
                    continue;
                }
            }
            let l = barycentric(mesh, t, p);
            let worst = l[0].min(l[1]).min(l[2]);
            if worst >= -1e-10 {
                return Some((t, l));
            }
            if worst >= -1e-7 && best.map(|x| worst > x.2).unwrap_or(true) {
                best = Some((t, l, worst));
            }
        }
        best.map(|(t, l, _)| (t, l))
    }
}

pub(crate) fn barycentric(mesh: &TriMesh, t: usize, p: Point) -> [f64; 3] {
    let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det;
    [1.0 - l1 - l2, l1, l2]
}
