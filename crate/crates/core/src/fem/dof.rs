use alloc::vec;
use alloc::vec::Vec;

use crate::mesh::{PeriodicMap, Region, TriMesh};

pub const NO_DOF: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Tp,
    Tc,
}

/// Vertex → DOF maps for the packing and cell temperatures. Global layout
/// is `[T_p ..., T_c ...]`; interface vertices carry one DOF of each.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub tp: Vec<usize>,
    pub tc: Vec<usize>,
    pub n_tp: usize,
    pub n_tc: usize,
}

impl DofMap {
    /// Builds the maps, optionally identifying periodic vertices with their
    /// masters. `fields` selects which temperatures are present.
    pub fn new(mesh: &TriMesh, periodic: Option<&PeriodicMap>, tp: bool, tc: bool) -> Self {
        let nv = mesh.vertices.len();
        let mut touches_p = vec![false; nv];
        let mut touches_c = vec![false; nv];
        for (tri, r) in mesh.triangles.iter().zip(&mesh.regions) {
            for &v in tri {
                match r {
                    Region::Packing => touches_p[v] = true,
                    Region::Cell => touches_c[v] = true,
                }
            }
        }
        let masters: Vec<usize> = match periodic {
            Some(p) => p.masters(nv),
            None => (0..nv).collect(),
        };
        let number = |touch: &[bool], offset: usize, on: bool| -> (Vec<usize>, usize) {
            let mut map = vec![NO_DOF; nv];
            if !on {
                return (map, 0);
            }
            let mut n = 0;
            for v in 0..nv {
                if touch[v] && masters[v] == v {
                    map[v] = offset + n;
                    n += 1;
                }
            }
            for v in 0..nv {
                if touch[v] && masters[v] != v {
                    map[v] = map[masters[v]];
                }
            }
            (map, n)
        };
        let (tp_map, n_tp) = number(&touches_p, 0, tp);
        let (tc_map, n_tc) = number(&touches_c, n_tp, tc);
        DofMap { tp: tp_map, tc: tc_map, n_tp, n_tc }
    }

    pub fn n(&self) -> usize {
        self.n_tp + self.n_tc
    }

    pub fn map(&self, f: Field) -> &[usize] {
        match f {
            Field::Tp => &self.tp,
            Field::Tc => &self.tc,
        }
    }

    /// DOF range of a field in the global vector.
    pub fn range(&self, f: Field) -> core::ops::Range<usize> {
        match f {
            Field::Tp => 0..self.n_tp,
            Field::Tc => self.n_tp..self.n_tp + self.n_tc,
        }
    }

    /// Per-vertex values of a field (NaN where the field is absent).
    pub fn nodal(&self, f: Field, u: &[f64]) -> Vec<f64> {
        self.map(f).iter().map(|&d| if d == NO_DOF { f64::NAN } else { u[d] }).collect()
    }

    /// Global vector from per-vertex values of both fields.
    pub fn gather(&self, tp: &[f64], tc: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n()];
        for (v, &d) in self.tp.iter().enumerate() {
            if d != NO_DOF {
                u[d] = tp[v];
            }
        }
        for (v, &d) in self.tc.iter().enumerate() {
            if d != NO_DOF {
                u[d] = tc[v];
            }
        }
        u
    }
}
