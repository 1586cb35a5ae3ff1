//! Linear solvers: Jacobi-preconditioned CG and BiCGSTAB, and a banded LU
//! with partial pivoting after reverse Cuthill–McKee reordering.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::sparse::{Csr, dot, norm2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    Iterative,
}

/// Solves `A x = b` to relative residual `tol`.
///
/// The iterative path uses CG for symmetric matrices, falling back to
/// BiCGSTAB and then the direct solver.
pub fn solve_linear(a: &Csr, b: &[f64], method: Method, tol: f64) -> Result<Vec<f64>> {
    if a.n != b.len() {
        return Err(Error::Shape(alloc::format!("matrix {} vs rhs {}", a.n, b.len())));
    }
    match method {
        Method::Direct => {
            let lu = BandedLu::factor(a)?;
            let x = lu.solve(b);
            check_residual(a, &x, b, tol, "banded LU")?;
            Ok(x)
        }
        Method::Iterative => {
            let cap = 20 * a.n + 100;
            let symmetric = a.asymmetry() <= 1e-12 * a.val.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if symmetric {
                if let Ok((x, _)) = pcg(a, b, None, tol, cap, &jacobi(a)) {
                    return Ok(x);
                }
            }
            if let Ok((x, _)) = bicgstab(a, b, None, tol, cap) {
                return Ok(x);
            }
            solve_linear(a, b, Method::Direct, tol)
        }
    }
}

fn check_residual(a: &Csr, x: &[f64], b: &[f64], tol: f64, method: &'static str) -> Result<()> {
    let r = rel_residual(a, x, b);
    if r <= tol {
        Ok(())
    } else {
        Err(Error::LinearSolve { method, residual: r, iterations: 1 })
    }
}

pub fn rel_residual(a: &Csr, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| q - p).collect();
    let nb = norm2(b);
    if nb == 0.0 { norm2(&r) } else { norm2(&r) / nb }
}

/// Inverse diagonal (1 where the diagonal vanishes).
pub fn jacobi(a: &Csr) -> Vec<f64> {
    a.diag().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect()
}

/// Preconditioned CG with a diagonal preconditioner.
pub fn pcg(a: &Csr, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize, inv_diag: &[f64]) -> Result<(Vec<f64>, usize)> {
    pcg_with(a, b, x0, tol, max_iter, |r, z| {
        for i in 0..r.len() {
            z[i] = inv_diag[i] * r[i];
        }
    })
}

/// Preconditioned CG with an arbitrary SPD preconditioner `z = M⁻¹ r`.
pub fn pcg_with(
    a: &Csr,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    mut precond: impl FnMut(&[f64], &mut [f64]),
) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let nb = norm2(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if nb == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut r = a.mul(&x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if norm2(&r) <= tol * nb {
        return Ok((x, 0));
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolve { method: "CG", residual: norm2(&r) / nb, iterations: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = norm2(&r);
        if rn <= tol * nb {
            // Guard against drift of the recursive residual.
            let true_r = rel_residual(a, &x, b);
            if true_r <= 10.0 * tol {
                return Ok((x, it));
            }
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolve { method: "CG", residual: rel_residual(a, &x, b), iterations: max_iter })
}

/// Jacobi-preconditioned BiCGSTAB.
pub fn bicgstab(a: &Csr, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let dinv = jacobi(a);
    let nb = norm2(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if nb == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut r = a.mul(&x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zz = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = dinv[i] * p[i];
        }
        a.mul_into(&y, &mut v);
        let r0v = dot(&r0, &v);
        if r0v == 0.0 {
            break;
        }
        alpha = rho / r0v;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol * nb {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            if rel_residual(a, &x, b) <= 10.0 * tol {
                return Ok((x, it));
            }
            r.copy_from_slice(&s);
            continue;
        }
        for i in 0..n {
            zz[i] = dinv[i] * s[i];
        }
        a.mul_into(&zz, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zz[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= tol * nb && rel_residual(a, &x, b) <= 10.0 * tol {
            return Ok((x, it));
        }
    }
    Err(Error::LinearSolve { method: "BiCGSTAB", residual: rel_residual(a, &x, b), iterations: max_iter })
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern: `perm[new] = old`.
pub fn rcm(a: &Csr) -> Vec<usize> {
    let n = a.n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let deg: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_deg: Vec<usize> = (0..n).collect();
    by_deg.sort_by_key(|&v| deg[v]);
    for &seed in &by_deg {
        if visited[seed] {
            continue;
        }
        // Pseudo-peripheral start: last vertex of a BFS from the seed.
        let start = {
            let mut last = seed;
            let mut seen = vec![false; 0];
            seen.resize(n, false);
            let mut q = VecDeque::from([seed]);
            seen[seed] = true;
            while let Some(v) = q.pop_front() {
                last = v;
                for &w in &adj[v] {
                    if !seen[w] && !visited[w] {
                        seen[w] = true;
                        q.push_back(w);
                    }
                }
            }
            last
        };
        let mut q = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = q.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| deg[w]);
            for w in nb {
                visited[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Banded LU factorization `P A = L U` of a reordered sparse matrix.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    perm: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &Csr) -> Result<Self> {
        let n = a.n;
        let perm = rcm(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            for &j in a.row(i).0 {
                let (ni, nj) = (inv[i], inv[j]);
                if ni > nj {
                    kl = kl.max(ni - nj);
                } else {
                    ku = ku.max(nj - ni);
                }
            }
        }
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                let (ni, nj) = (inv[i], inv[j]);
                ab[nj * ldab + kv + ni - nj] += x;
            }
        }
        let mut lu = BandedLu { n, kl, ku, ldab, ab, ipiv: vec![0; n], perm };
        lu.factorize()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    fn factorize(&mut self) -> Result<()> {
        let n = self.n;
        let kv = self.kl + self.ku;
        let mut ju = 0usize;
        let scale = self.ab.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = 0.0;
            for i in 0..=km {
                let v = self.ab[self.idx(j + i, j)].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            self.ipiv[j] = j + jp;
            if !(best > 1e-300 * scale.max(1e-300)) || best == 0.0 {
                return Err(Error::LinearSolve { method: "banded LU", residual: f64::INFINITY, iterations: j });
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[self.idx(j, j)];
            for i in 1..=km {
                let k = self.idx(j + i, j);
                self.ab[k] /= piv;
            }
            for c in j + 1..=ju {
                let f = self.ab[self.idx(j, c)];
                if f == 0.0 {
                    continue;
                }
                for i in 1..=km {
                    let l = self.ab[self.idx(j + i, j)];
                    let k = self.idx(j + i, c);
                    self.ab[k] -= l * f;
                }
            }
        }
        let _ = kv;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth after reordering.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let kv = self.kl + self.ku;
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let p = self.ipiv[j];
            if p != j {
                y.swap(j, p);
            }
            let yj = y[j];
            if yj != 0.0 {
                for i in 1..=km {
                    y[j + i] -= self.ab[self.idx(j + i, j)] * yj;
                }
            }
        }
        for j in (0..n).rev() {
            y[j] /= self.ab[self.idx(j, j)];
            let yj = y[j];
            if yj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    y[i] -= self.ab[self.idx(i, j)] * yj;
                }
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::sparse::Triplets;
    use proptest::prelude::*;

    /// Dense Gaussian elimination with partial pivoting (test oracle).
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn to_dense(a: &Csr) -> Vec<Vec<f64>> {
        (0..a.n).map(|i| (0..a.n).map(|j| a.get(i, j)).collect()).collect()
    }

    /// Sparse SPD test matrix from a deterministic LCG: random graph
    /// Laplacian plus a positive diagonal.
    fn random_spd(n: usize, seed: u64) -> Csr {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut t = Triplets::new(n);
        for i in 0..n {
            t.push(i, i, 0.5 + next());
            for _ in 0..3 {
                let j = (next() * n as f64) as usize % n;
                if j != i {
                    let w = next();
                    t.push(i, i, w);
                    t.push(j, j, w);
                    t.push(i, j, -w);
                    t.push(j, i, -w);
                }
            }
        }
        t.build()
    }

    #[test]
    fn identity_and_small_examples() {
        let id = Csr::identity(4);
        let b = vec![1.0, -2.0, 3.0, 0.5];
        for m in [Method::Direct, Method::Iterative] {
            assert_eq!(solve_linear(&id, &b, m, 1e-10).unwrap(), b);
        }
        let mut t = Triplets::new(2);
        t.push(0, 0, 2.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        t.push(1, 1, 2.0);
        let a = t.build();
        for m in [Method::Direct, Method::Iterative] {
            let x = solve_linear(&a, &[3.0, 3.0], m, 1e-12).unwrap();
            assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_spd_against_dense_oracle() {
        let a = random_spd(100, 7);
        let b: Vec<f64> = (0..100).map(|i| libm::sin(i as f64)).collect();
        let xd = dense_solve(to_dense(&a), b.clone());
        for m in [Method::Direct, Method::Iterative] {
            let x = solve_linear(&a, &b, m, 1e-12).unwrap();
            for i in 0..100 {
                assert!((x[i] - xd[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn nonsymmetric_direct_and_bicgstab() {
        let a = random_spd(60, 3);
        let mut t = Triplets::new(60);
        for i in 0..59 {
            t.push(i, i + 1, 0.3);
        }
        let a = a.lin_comb(1.0, &t.build(), 1.0).unwrap();
        let b: Vec<f64> = (0..60).map(|i| (i as f64).cos()).collect();
        let xd = dense_solve(to_dense(&a), b.clone());
        let x = solve_linear(&a, &b, Method::Direct, 1e-12).unwrap();
        let (y, _) = bicgstab(&a, &b, None, 1e-12, 1000).unwrap();
        for i in 0..60 {
            assert!((x[i] - xd[i]).abs() < 1e-10);
            assert!((y[i] - xd[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_matrix_reports_error() {
        let a = Csr::zeros(3);
        assert!(matches!(solve_linear(&a, &[1.0, 0.0, 0.0], Method::Direct, 1e-10), Err(Error::LinearSolve { .. })));
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = random_spd(50, 11);
        let mut p = rcm(&a);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn residual_meets_tolerance(n in 2usize..80, seed in 0u64..1000) {
            let a = random_spd(n, seed);
            let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
            for m in [Method::Direct, Method::Iterative] {
                let x = solve_linear(&a, &b, m, 1e-10).unwrap();
                prop_assert!(rel_residual(&a, &x, &b) <= 1e-10);
            }
        }
    }
}
