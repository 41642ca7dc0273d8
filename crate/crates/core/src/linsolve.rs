//! Compressed sparse storage and a left-looking sparse LU with threshold
//! partial pivoting.
//!
//! The factorization follows the Gilbert-Peierls scheme: column `k` of
//! `P A Q` is obtained by a sparse triangular solve with the `L` computed so
//! far, whose nonzero pattern comes from a depth-first search over the graph
//! of `L`. The column order `Q` is supplied by the caller; row pivots are
//! chosen on the fly, preferring sparse rows among candidates within a factor
//! `tau` of the largest magnitude.

use std::io::Write;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::IndexOutOfRange {
                    index: if r >= nrows { r } else { c },
                    len: if r >= nrows { nrows } else { ncols },
                });
            }
            counts[r + 1] += 1;
        }
        for r in 0..nrows {
            counts[r + 1] += counts[r];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let p = next[r];
            cols[p] = c;
            vals[p] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|p| (cols[p], vals[p])));
            scratch.sort_by_key(|e| e.0);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(a: &nalgebra::DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                if a[(r, c)] != 0.0 {
                    t.push((r, c, a[(r, c)]));
                }
            }
        }
        CsrMatrix::from_triplets(a.nrows(), a.ncols(), &t).expect("in-range triplets")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(p) => self.values[self.row_ptr[r] + p],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &t).expect("in-range triplets")
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    /// Matrix Market coordinate format, 1-based, `real general`.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(out, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

const NONE: usize = usize::MAX;

/// Factors `P A Q = L U` with unit lower triangular `L`.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    a: CsrMatrix,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    /// Original row -> pivot position.
    pinv: Vec<usize>,
    /// Pivot position -> original column.
    q: Vec<usize>,
}

/// Pivoting controls.
#[derive(Debug, Clone, Copy)]
pub struct LuOptions {
    /// Candidate rows must satisfy `|x_i| >= tau * max |x|`.
    pub tau: f64,
}

impl Default for LuOptions {
    fn default() -> Self {
        LuOptions { tau: 0.1 }
    }
}

/// Result of a norm estimate, with the number of solves spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub probes: usize,
}

impl SparseLu {
    /// Factors `a` with columns visited in `col_order` (identity if `None`).
    pub fn factorize(a: &CsrMatrix, col_order: Option<&[usize]>, opts: LuOptions) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::CountMismatch {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let n = a.nrows();
        let q: Vec<usize> = match col_order {
            Some(order) => {
                if order.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: order.len(),
                    });
                }
                let mut seen = vec![false; n];
                for &c in order {
                    if c >= n || seen[c] {
                        return Err(Error::InvalidParameter {
                            name: "col_order",
                            reason: "column order is not a permutation".into(),
                        });
                    }
                    seen[c] = true;
                }
                order.to_vec()
            }
            None => (0..n).collect(),
        };
        let at = a.transpose(); // rows of `at` are columns of `a`
        let row_weight: Vec<usize> = (0..n).map(|r| a.row_nnz(r)).collect();

        let mut l_ptr = vec![0usize];
        let mut l_idx: Vec<usize> = Vec::new();
        let mut l_val: Vec<f64> = Vec::new();
        let mut u_ptr = vec![0usize];
        let mut u_idx: Vec<usize> = Vec::new();
        let mut u_val: Vec<f64> = Vec::new();
        let mut u_diag = vec![0.0; n];
        let mut pinv = vec![NONE; n];

        let mut x = vec![0.0; n];
        let mut mark = vec![NONE; n];
        let mut post: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for k in 0..n {
            let col = q[k];
            // Pattern of L \ A[:, col] in topological order.
            post.clear();
            for (r, _) in at.row(col) {
                if mark[r] == k {
                    continue;
                }
                mark[r] = k;
                stack.push((r, 0));
                while let Some(top) = stack.last_mut() {
                    let node = top.0;
                    let j = pinv[node];
                    let mut next = NONE;
                    if j != NONE {
                        while l_ptr[j] + top.1 < l_ptr[j + 1] {
                            let child = l_idx[l_ptr[j] + top.1];
                            top.1 += 1;
                            if mark[child] != k {
                                next = child;
                                break;
                            }
                        }
                    }
                    if next == NONE {
                        post.push(node);
                        stack.pop();
                    } else {
                        mark[next] = k;
                        stack.push((next, 0));
                    }
                }
            }
            for (r, v) in at.row(col) {
                x[r] = v;
            }
            for &node in post.iter().rev() {
                let j = pinv[node];
                if j == NONE {
                    continue;
                }
                let xj = x[node];
                if xj != 0.0 {
                    for p in l_ptr[j]..l_ptr[j + 1] {
                        x[l_idx[p]] -= l_val[p] * xj;
                    }
                }
            }
            // Pivot choice among rows not yet pivoted.
            let mut amax = 0.0f64;
            for &node in &post {
                if pinv[node] == NONE {
                    amax = amax.max(x[node].abs());
                }
            }
            if !(amax > 0.0) || !amax.is_finite() {
                for &node in &post {
                    x[node] = 0.0;
                }
                return Err(Error::SingularMatrix { column: col, row: k });
            }
            let threshold = opts.tau * amax;
            let mut pivot = NONE;
            for &node in &post {
                if pinv[node] != NONE || x[node].abs() < threshold {
                    continue;
                }
                if pivot == NONE
                    || (row_weight[node], node) < (row_weight[pivot], pivot)
                {
                    pivot = node;
                }
            }
            let pval = x[pivot];
            u_diag[k] = pval;
            pinv[pivot] = k;
            let mut upper: Vec<(usize, f64)> = Vec::new();
            for &node in &post {
                let v = x[node];
                x[node] = 0.0;
                if node == pivot {
                    continue;
                }
                let j = pinv[node];
                if j != NONE {
                    if v != 0.0 {
                        upper.push((j, v));
                    }
                } else if v != 0.0 {
                    l_idx.push(node);
                    l_val.push(v / pval);
                }
            }
            upper.sort_by_key(|e| e.0);
            for (j, v) in upper {
                u_idx.push(j);
                u_val.push(v);
            }
            l_ptr.push(l_idx.len());
            u_ptr.push(u_idx.len());
        }
        for r in l_idx.iter_mut() {
            *r = pinv[*r];
        }
        Ok(SparseLu {
            n,
            a: a.clone(),
            l_ptr,
            l_idx,
            l_val,
            u_ptr,
            u_idx,
            u_val,
            u_diag,
            pinv,
            q,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored nonzeros of `L` (without the unit diagonal) and `U`.
    pub fn fill(&self) -> (usize, usize) {
        (self.l_val.len(), self.u_val.len() + self.n)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut w = vec![0.0; n];
        for i in 0..n {
            w[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let wj = w[j];
            if wj != 0.0 {
                for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                    w[self.l_idx[p]] -= self.l_val[p] * wj;
                }
            }
        }
        for j in (0..n).rev() {
            w[j] /= self.u_diag[j];
            let wj = w[j];
            if wj != 0.0 {
                for p in self.u_ptr[j]..self.u_ptr[j + 1] {
                    w[self.u_idx[p]] -= self.u_val[p] * wj;
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.q[k]] = w[k];
        }
        x
    }

    fn solve_transpose_raw(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut w: Vec<f64> = (0..n).map(|k| b[self.q[k]]).collect();
        for k in 0..n {
            let mut s = w[k];
            for p in self.u_ptr[k]..self.u_ptr[k + 1] {
                s -= self.u_val[p] * w[self.u_idx[p]];
            }
            w[k] = s / self.u_diag[k];
        }
        for k in (0..n).rev() {
            let mut s = w[k];
            for p in self.l_ptr[k]..self.l_ptr[k + 1] {
                s -= self.l_val[p] * w[self.l_idx[p]];
            }
            w[k] = s;
        }
        (0..n).map(|i| w[self.pinv[i]]).collect()
    }

    fn check_len(&self, b: &[f64]) -> Result<()> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        Ok(())
    }

    /// Solves `A x = b` with up to three steps of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b)?;
        self.refine(b, false)
    }

    /// Solves `A^T x = b` with up to three steps of iterative refinement.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b)?;
        self.refine(b, true)
    }

    fn apply(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        if transpose {
            let mut y = vec![0.0; self.n];
            for r in 0..self.n {
                for (c, v) in self.a.row(r) {
                    y[c] += v * x[r];
                }
            }
            y
        } else {
            self.a.mul_vec(x)
        }
    }

    fn refine(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let raw = |v: &[f64]| {
            if transpose {
                self.solve_transpose_raw(v)
            } else {
                self.solve_raw(v)
            }
        };
        let mut x = raw(b);
        let a_norm = self.a.norm_inf();
        let b_norm = inf_norm(b);
        let rel = |x: &[f64], r: &[f64]| inf_norm(r) / (a_norm * inf_norm(x) + b_norm).max(f64::MIN_POSITIVE);
        let residual = |x: &[f64]| {
            let ax = self.apply(x, transpose);
            b.iter().zip(ax).map(|(bi, ai)| bi - ai).collect::<Vec<f64>>()
        };
        let mut r = residual(&x);
        let mut err = rel(&x, &r);
        for _ in 0..3 {
            if err <= 4.0 * f64::EPSILON {
                break;
            }
            let dx = raw(&r);
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let tr = residual(&trial);
            let terr = rel(&trial, &tr);
            if !(terr < err) {
                break;
            }
            x = trial;
            r = tr;
            err = terr;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { column: 0, row: 0 });
        }
        Ok(x)
    }

    /// Lower-bound estimate of `||A^{-1}||_inf = ||A^{-T}||_1` by Hager's
    /// method with Higham's alternating probe.
    pub fn inv_inf_norm_estimate(&self) -> Result<NormEstimate> {
        self.inv_inf_norm_estimate_with(5, &[])
    }

    /// As [`Self::inv_inf_norm_estimate`], with an iteration cap and extra probe
    /// vectors whose ratios `||A^{-T} v||_1 / ||v||_1` also enter the maximum.
    pub fn inv_inf_norm_estimate_with(&self, max_iter: usize, extra: &[Vec<f64>]) -> Result<NormEstimate> {
        let n = self.n;
        if n == 0 {
            return Ok(NormEstimate { value: 0.0, probes: 0 });
        }
        let mut probes = 0usize;
        let mut best = 0.0f64;
        let mut x = vec![1.0 / n as f64; n];
        let mut last_j = NONE;
        for _ in 0..max_iter.max(1) {
            let y = self.solve_transpose(&x)?;
            probes += 1;
            let est = one_norm(&y);
            best = best.max(est);
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve(&xi)?;
            probes += 1;
            let (j, zmax) = z
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        let y = self.solve_transpose(&alt)?;
        probes += 1;
        best = best.max(2.0 * one_norm(&y) / (3.0 * n as f64));
        for v in extra {
            self.check_len(v)?;
            let denom = one_norm(v);
            if denom > 0.0 {
                let y = self.solve_transpose(v)?;
                probes += 1;
                best = best.max(one_norm(&y) / denom);
            }
        }
        Ok(NormEstimate { value: best, probes })
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn one_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, density: f64, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |r, c| {
            if r == c || rng.random_bool(density) {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        })
    }

    fn dense_inv_inf(a: &DMatrix<f64>) -> f64 {
        let inv = a.clone().try_inverse().unwrap();
        (0..inv.nrows()).map(|r| inv.row(r).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, -1.0)]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![3.5, -1.0]);
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
        assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn identity_and_diagonal() {
        let lu = SparseLu::factorize(&CsrMatrix::identity(5), None, LuOptions::default()).unwrap();
        let b = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        assert_eq!(lu.solve(&b).unwrap(), b);
        assert_eq!(lu.solve(&[0.0; 5]).unwrap(), vec![0.0; 5]);
        assert_eq!(lu.inv_inf_norm_estimate().unwrap().value, 1.0);
        let d = CsrMatrix::from_dense(&DMatrix::from_diagonal_element(4, 4, 2.0));
        let lu = SparseLu::factorize(&d, None, LuOptions::default()).unwrap();
        assert_eq!(lu.solve(&[1.0; 4]).unwrap(), vec![0.5; 4]);
        assert_eq!(lu.inv_inf_norm_estimate().unwrap().value, 0.5);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 0, 1.0), (2, 2, 1.0)]).unwrap();
        match SparseLu::factorize(&a, None, LuOptions::default()) {
            Err(Error::SingularMatrix { column, row }) => {
                assert_eq!((column, row), (1, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn random_system_matches_dense_oracle() {
        let a = random_sparse(50, 0.1, 11);
        let csr = CsrMatrix::from_dense(&a);
        let order: Vec<usize> = (0..50).rev().collect();
        let lu = SparseLu::factorize(&csr, Some(&order), LuOptions::default()).unwrap();
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x = lu.solve(&b).unwrap();
        let oracle = a.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        let scale = oracle.amax();
        for i in 0..50 {
            assert!((x[i] - oracle[i]).abs() <= 1e-10 * scale);
        }
        let xt = lu.solve_transpose(&b).unwrap();
        let oracle_t = a.transpose().lu().solve(&DVector::from_vec(b)).unwrap();
        for i in 0..50 {
            assert!((xt[i] - oracle_t[i]).abs() <= 1e-10 * oracle_t.amax());
        }
    }

    #[test]
    fn estimator_is_a_tight_lower_bound() {
        for seed in 0..5 {
            let a = random_sparse(30, 0.3, 100 + seed);
            let lu = SparseLu::factorize(&CsrMatrix::from_dense(&a), None, LuOptions::default()).unwrap();
            let est = lu.inv_inf_norm_estimate().unwrap();
            let exact = dense_inv_inf(&a);
            assert!(est.value <= exact * (1.0 + 1e-10));
            assert!(est.value >= exact / 3.0, "est {} exact {}", est.value, exact);
        }
    }

    #[test]
    fn extra_probes_never_lower_the_estimate() {
        let a = random_sparse(20, 0.3, 5);
        let lu = SparseLu::factorize(&CsrMatrix::from_dense(&a), None, LuOptions::default()).unwrap();
        let base = lu.inv_inf_norm_estimate().unwrap();
        let extra: Vec<Vec<f64>> = (0..20).map(|j| (0..20).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let more = lu.inv_inf_norm_estimate_with(5, &extra).unwrap();
        assert!(more.value >= base.value);
        assert!((more.value - dense_inv_inf(&a)).abs() <= 1e-10 * more.value);
        assert!(more.probes > base.probes);
    }

    #[test]
    fn matrix_market_is_one_based() {
        let m = CsrMatrix::from_triplets(2, 2, &[(1, 0, 3.0)]).unwrap();
        let mut buf = Vec::new();
        m.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real general");
        assert_eq!(lines[1], "2 2 1");
        assert!(lines[2].starts_with("2 1 3.0"));
    }

    #[test]
    fn rejects_bad_column_orders() {
        let a = CsrMatrix::identity(3);
        assert!(SparseLu::factorize(&a, Some(&[0, 0, 1]), LuOptions::default()).is_err());
        assert!(SparseLu::factorize(&a, Some(&[0, 1]), LuOptions::default()).is_err());
        let lu = SparseLu::factorize(&a, None, LuOptions::default()).unwrap();
        assert!(lu.solve(&[1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn factor_residual_is_small(n in 2usize..40, seed in 0u64..1000, tau in 0.01f64..1.0) {
            let a = random_sparse(n, 0.2, seed) + DMatrix::identity(n, n) * 3.0;
            let csr = CsrMatrix::from_dense(&a);
            let lu = SparseLu::factorize(&csr, None, LuOptions { tau }).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5 {
                let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b = csr.mul_vec(&xs);
                let x = lu.solve(&b).unwrap();
                let r: Vec<f64> = csr.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
                let rel = inf_norm(&r) / (csr.norm_inf() * inf_norm(&x) + inf_norm(&b));
                prop_assert!(rel <= 1e-10);
            }
        }
    }
}
