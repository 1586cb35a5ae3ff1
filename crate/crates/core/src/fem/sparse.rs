use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Square compressed-row matrix. Column indices are sorted and unique
/// within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

/// Coordinate-format accumulator; duplicates are summed by [`Triplets::build`].
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets { n, entries: Vec::new() }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.entries.push((i, j, v));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extend_from(&mut self, other: &Triplets) {
        self.entries.extend_from_slice(&other.entries);
    }

    /// Sums duplicates. Explicit zeros are kept so the pattern does not
    /// depend on coefficient values.
    pub fn build(mut self) -> Csr {
        self.entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col = Vec::with_capacity(self.entries.len());
        let mut val: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr { n: self.n, row_ptr, col, val }
    }
}

impl Csr {
    pub fn zeros(n: usize) -> Self {
        Csr { n, row_ptr: vec![0; n + 1], col: Vec::new(), val: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Csr { n, row_ptr: (0..=n).collect(), col: (0..n).collect(), val: vec![1.0; n] }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col[r.clone()], &self.val[r])
    }

    /// Storage position of entry (i, j), if present in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (c, _) = self.row(i);
        c.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map(|k| self.val[k]).unwrap_or(0.0)
    }

    /// y = A x
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.val.iter_mut().for_each(|v| *v *= s);
    }

    pub fn transpose(&self) -> Csr {
        let mut t = Triplets::new(self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                t.push(j, i, x);
            }
        }
        t.build()
    }

    /// a·self + b·other over the union pattern.
    pub fn lin_comb(&self, a: f64, other: &Csr, b: f64) -> Result<Csr> {
        if self.n != other.n {
            return Err(Error::Shape(alloc::format!("matrix sizes {} and {}", self.n, other.n)));
        }
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut val = Vec::with_capacity(col.capacity());
        for i in 0..self.n {
            let (c1, v1) = self.row(i);
            let (c2, v2) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < c1.len() || q < c2.len() {
                let j1 = c1.get(p).copied().unwrap_or(usize::MAX);
                let j2 = c2.get(q).copied().unwrap_or(usize::MAX);
                if j1 == j2 {
                    col.push(j1);
                    val.push(a * v1[p] + b * v2[q]);
                    p += 1;
                    q += 1;
                } else if j1 < j2 {
                    col.push(j1);
                    val.push(a * v1[p]);
                    p += 1;
                } else {
                    col.push(j2);
                    val.push(b * v2[q]);
                    q += 1;
                }
            }
            row_ptr[i + 1] = col.len();
        }
        Ok(Csr { n: self.n, row_ptr, col, val })
    }

    /// Adds `s·other` into `self`, requiring `other`'s pattern to be a
    /// subset of `self`'s.
    pub fn add_assign_subset(&mut self, s: f64, other: &Csr) -> Result<()> {
        for i in 0..other.n {
            let (c, v) = other.row(i);
            for (&j, &x) in c.iter().zip(v) {
                let k = self.position(i, j).ok_or_else(|| Error::Shape(alloc::format!("entry ({i}, {j}) outside pattern")))?;
                self.val[k] += s * x;
            }
        }
        Ok(())
    }

    /// Largest |A_ij − A_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                m = m.max((x - self.get(j, i)).abs());
            }
        }
        m
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let mut t = Triplets::new(3);
        t.push(0, 0, 1.0);
        t.push(2, 1, 4.0);
        t.push(0, 0, 2.0);
        t.push(1, 2, 0.0);
        let a = t.build();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(2, 1), 4.0);
        assert!(a.position(1, 2).is_some());
        assert_eq!(a.mul(&[1.0, 1.0, 1.0]), vec![3.0, 0.0, 4.0]);
    }

    #[test]
    fn lin_comb_union() {
        let mut t = Triplets::new(2);
        t.push(0, 1, 1.0);
        let a = t.build();
        let b = Csr::identity(2);
        let c = a.lin_comb(2.0, &b, -1.0).unwrap();
        assert_eq!(c.get(0, 0), -1.0);
        assert_eq!(c.get(0, 1), 2.0);
        assert_eq!(c.transpose().get(1, 0), 2.0);
        assert_eq!(c.asymmetry(), 2.0);
    }
}
