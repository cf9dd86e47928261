use super::{LinalgError, SymSparse};
use std::collections::VecDeque;

/// Reverse Cuthill-McKee ordering. Returns `perm` with `perm[new] = old`.
pub fn rcm_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let deg: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.sort_by_key(|&i| (deg[i], i));
    for &seed in &nodes {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(adj, seed, &deg);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nb.sort_by_key(|&v| (deg[v], v));
            nb.dedup();
            for v in nb {
                if !visited[v] {
                    visited[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> (Vec<usize>, usize) {
    let mut level = vec![usize::MAX; adj.len()];
    let mut q = VecDeque::new();
    level[start] = 0;
    q.push_back(start);
    let mut last = start;
    while let Some(u) = q.pop_front() {
        last = u;
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                q.push_back(v);
            }
        }
    }
    (level, last)
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize, deg: &[usize]) -> usize {
    let mut cur = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let (level, _) = bfs_levels(adj, cur);
        let depth = level.iter().filter(|&&l| l != usize::MAX).max().copied().unwrap_or(0);
        if depth <= ecc && cur != seed {
            break;
        }
        ecc = depth;
        let next = (0..adj.len())
            .filter(|&i| level[i] == depth)
            .min_by_key(|&i| (deg[i], i))
            .unwrap_or(cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// LLᵀ factorization stored as a row-wise skyline in RCM order.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    vals: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factorizes `a + diag(shift)`; `shift` is indexed in the original order.
    pub fn factor(a: &SymSparse, shift: Option<&[f64]>) -> Result<Self, LinalgError> {
        let perm = rcm_order(&a.adjacency());
        Self::factor_with_order(a, shift, perm)
    }

    pub fn factor_with_order(
        a: &SymSparse,
        shift: Option<&[f64]>,
        perm: Vec<usize>,
    ) -> Result<Self, LinalgError> {
        let n = a.dim();
        if let Some(s) = shift {
            if s.len() != n {
                return Err(LinalgError::Dimension { expected: n, got: s.len() });
            }
        }
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        // envelope: first nonzero column of each permuted row
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for (j, _) in a.row(i) {
                let (pi, pj) = (iperm[i], iperm[j]);
                let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
                if c < first[r] {
                    first[r] = c;
                }
            }
        }
        let mut start = vec![0usize; n + 1];
        for r in 0..n {
            start[r + 1] = start[r] + (r - first[r] + 1);
        }
        let mut vals = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (pi, pj) = (iperm[i], iperm[j]);
                let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
                vals[start[r] + (c - first[r])] += v;
            }
        }
        if let Some(s) = shift {
            for (i, &d) in s.iter().enumerate() {
                let r = iperm[i];
                vals[start[r] + (r - first[r])] += d;
            }
        }
        for i in 0..n {
            let fi = first[i];
            let si = start[i];
            for j in fi..i {
                let fj = first[j];
                let sj = start[j];
                let k0 = fi.max(fj);
                let mut s = vals[si + (j - fi)];
                let ri = &vals[si + (k0 - fi)..si + (j - fi)];
                let rj = &vals[sj + (k0 - fj)..sj + (j - fj)];
                s -= dot(ri, rj);
                let ljj = vals[sj + (j - fj)];
                vals[si + (j - fi)] = s / ljj;
            }
            let row = &vals[si..si + (i - fi)];
            let d = vals[si + (i - fi)] - dot(row, row);
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: perm[i], value: d });
            }
            vals[si + (i - fi)] = d.sqrt();
        }
        Ok(Self { n, perm, first, start, vals })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.vals.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::Dimension { expected: self.n, got: b.len() });
        }
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        // forward: L y = b
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let s = y[i] - dot(&self.vals[si..si + (i - fi)], &y[fi..i]);
            y[i] = s / self.vals[si + (i - fi)];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            y[i] /= self.vals[si + (i - fi)];
            let yi = y[i];
            for (k, l) in self.vals[si..si + (i - fi)].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }

    /// Solves for every column of `b` at once.
    pub fn solve_many(&self, b: &nalgebra::DMatrix<f64>) -> Result<nalgebra::DMatrix<f64>, LinalgError> {
        let k = b.ncols();
        let mut y = self.forward_rows(b)?;
        self.backward_rows(&mut y, k);
        let mut x = nalgebra::DMatrix::zeros(self.n, k);
        for (new, &old) in self.perm.iter().enumerate() {
            for c in 0..k {
                x[(old, c)] = y[new * k + c];
            }
        }
        Ok(x)
    }

    /// `W = L⁻¹ P b` for all columns, rows in the factor's internal order.
    /// Useful for Schur complements since `bᵀ A⁻¹ b = Wᵀ W`.
    pub fn half_solve_many(&self, b: &nalgebra::DMatrix<f64>) -> Result<nalgebra::DMatrix<f64>, LinalgError> {
        let k = b.ncols();
        let y = self.forward_rows(b)?;
        Ok(nalgebra::DMatrix::from_row_slice(self.n, k, &y))
    }

    fn forward_rows(&self, b: &nalgebra::DMatrix<f64>) -> Result<Vec<f64>, LinalgError> {
        if b.nrows() != self.n {
            return Err(LinalgError::Dimension { expected: self.n, got: b.nrows() });
        }
        let (n, k) = (self.n, b.ncols());
        let mut y = vec![0.0; n * k];
        for (new, &old) in self.perm.iter().enumerate() {
            for c in 0..k {
                y[new * k + c] = b[(old, c)];
            }
        }
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let (head, tail) = y.split_at_mut(i * k);
            let row = &mut tail[..k];
            for (off, &l) in self.vals[si..si + (i - fi)].iter().enumerate() {
                if l != 0.0 {
                    let src = &head[(fi + off) * k..(fi + off + 1) * k];
                    for c in 0..k {
                        row[c] -= l * src[c];
                    }
                }
            }
            let d = 1.0 / self.vals[si + (i - fi)];
            row.iter_mut().for_each(|v| *v *= d);
        }
        Ok(y)
    }

    fn backward_rows(&self, y: &mut [f64], k: usize) {
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            let d = 1.0 / self.vals[si + (i - fi)];
            let (head, tail) = y.split_at_mut(i * k);
            let row = &mut tail[..k];
            row.iter_mut().for_each(|v| *v *= d);
            for (off, &l) in self.vals[si..si + (i - fi)].iter().enumerate() {
                if l != 0.0 {
                    let dst = &mut head[(fi + off) * k..(fi + off + 1) * k];
                    for c in 0..k {
                        dst[c] -= l * row[c];
                    }
                }
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    let n4 = a.len() / 4 * 4;
    let mut k = 0;
    while k < n4 {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
        k += 4;
    }
    for j in n4..a.len() {
        s0 += a[j] * b[j];
    }
    (s0 + s1) + (s2 + s3)
}

#[cfg(test)]
mod tests {
    use super::super::Triplets;
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn grid_laplacian(k: usize, shift: f64) -> SymSparse {
        let n = k * k;
        let mut t = Triplets::new(n);
        for i in 0..k {
            for j in 0..k {
                let a = i * k + j;
                t.push(a, a, 4.0 + shift);
                if i + 1 < k {
                    t.push(a + k, a, -1.0);
                }
                if j + 1 < k {
                    t.push(a + 1, a, -1.0);
                }
            }
        }
        t.build()
    }

    #[test]
    fn solves_match_dense_cholesky() {
        let a = grid_laplacian(9, 0.1);
        let b: Vec<f64> = (0..81).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let x = EnvelopeCholesky::factor(&a, None).unwrap().solve(&b).unwrap();
        let dense = a.to_dense().cholesky().unwrap().solve(&DVector::from_vec(b));
        for (p, q) in x.iter().zip(dense.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_column_solve_matches_single_solves() {
        let a = grid_laplacian(7, 0.3);
        let chol = EnvelopeCholesky::factor(&a, None).unwrap();
        let b = DMatrix::from_fn(49, 5, |i, j| ((i * 13 + j * 7) % 9) as f64 - 4.0);
        let x = chol.solve_many(&b).unwrap();
        for j in 0..5 {
            let col: Vec<f64> = b.column(j).iter().copied().collect();
            let xj = chol.solve(&col).unwrap();
            for i in 0..49 {
                assert!((x[(i, j)] - xj[i]).abs() < 1e-13);
            }
        }
        let w = chol.half_solve_many(&b).unwrap();
        let schur = w.transpose() * &w;
        let direct = b.transpose() * &x;
        assert!((schur - direct).amax() < 1e-11);
    }

    #[test]
    fn rcm_reduces_envelope_on_scrambled_grid() {
        let k = 12;
        let base = grid_laplacian(k, 0.0);
        let n = k * k;
        let scramble: Vec<usize> = (0..n).map(|i| (i * 61) % n).collect();
        let mut t = Triplets::new(n);
        for i in 0..n {
            for (j, v) in base.row(i) {
                t.push(scramble[i], scramble[j], v);
            }
        }
        let a = t.build();
        let natural = EnvelopeCholesky::factor_with_order(&a, Some(&vec![1.0; n]), (0..n).collect()).unwrap();
        let rcm = EnvelopeCholesky::factor(&a, Some(&vec![1.0; n])).unwrap();
        assert!(rcm.envelope_size() * 2 < natural.envelope_size());
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut t = Triplets::new(2);
        t.push(0, 0, 1.0);
        t.push(1, 1, 1.0);
        t.push(1, 0, 2.0);
        assert!(matches!(
            EnvelopeCholesky::factor(&t.build(), None),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn push_block_folds_symmetric_entries() {
        let mut t = Triplets::new(3);
        let m = [2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 4.0];
        t.push_block(&[2, usize::MAX, 0], &m);
        let d = t.build().to_dense();
        let want = DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(d, want);
    }
}
