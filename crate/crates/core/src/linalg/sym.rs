use super::LinalgError;

/// Coordinate-format accumulator for a symmetric matrix. Entries may be pushed
/// for either triangle; they are folded onto the lower triangle and summed.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self { n, entries: Vec::with_capacity(cap) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` at (i, j). Off-diagonal contributions should be pushed once
    /// per unordered pair; pushing both (i, j) and (j, i) doubles them.
    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        if v != 0.0 {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            self.entries.push((r, c, v));
        }
    }

    /// Adds a dense symmetric block `m` (row-major, `idx.len()` squared) at
    /// the global indices `idx`, skipping indices equal to `usize::MAX`.
    pub fn push_block(&mut self, idx: &[usize], m: &[f64]) {
        let k = idx.len();
        debug_assert_eq!(m.len(), k * k);
        for a in 0..k {
            let ia = idx[a];
            if ia == usize::MAX {
                continue;
            }
            for b in 0..=a {
                let ib = idx[b];
                if ib == usize::MAX {
                    continue;
                }
                let v = if a == b { m[a * k + a] } else { 0.5 * (m[a * k + b] + m[b * k + a]) };
                if ia == ib && a != b {
                    // two local slots mapping to one global dof
                    self.push(ia, ib, 2.0 * v);
                } else {
                    self.push(ia, ib, v);
                }
            }
        }
    }

    pub fn build(self) -> SymSparse {
        SymSparse::from_triplets(self)
    }
}

/// Lower triangle (diagonal included) in compressed row form.
#[derive(Debug, Clone)]
pub struct SymSparse {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SymSparse {
    pub fn from_triplets(t: Triplets) -> Self {
        let n = t.n;
        let mut e = t.entries;
        e.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(e.len());
        let mut vals: Vec<f64> = Vec::with_capacity(e.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in e {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_lower(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).find(|(c, _)| *c == i).map(|(_, v)| v).unwrap_or(0.0))
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.n {
            return Err(LinalgError::Dimension { expected: self.n, got: x.len() });
        }
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        Ok(y)
    }

    /// Dense copy, for tests and small systems.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
                if i != j {
                    m[(j, i)] += v;
                }
            }
        }
        m
    }

    /// Symmetric adjacency lists (off-diagonal structure).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                if j != i {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        adj
    }
}
