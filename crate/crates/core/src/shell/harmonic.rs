//! Harmonic interpolation of the rest interior from the rest boundary.
//!
//! With the uniform graph Laplacian split into interior/boundary blocks,
//! `A_ii ī + A_ib b̄ = 0`, so `ī = L b̄` with `L = -A_ii⁻¹ A_ib`. `L` acts on
//! each coordinate separately and its rows sum to one.

use super::mesh::{Topology, P2};
use crate::linalg::{EnvelopeCholesky, Triplets};
use nalgebra::DMatrix;

#[derive(Clone, Debug)]
pub struct Harmonic {
    /// Boundary nodes in loop order; column `k` of `l` belongs to `boundary[k]`.
    pub boundary: Vec<usize>,
    pub interior: Vec<usize>,
    /// `node -> index` into `boundary` or `interior`.
    pub slot: Vec<usize>,
    pub l: DMatrix<f64>,
}

impl Harmonic {
    pub fn new(topo: &Topology, n_nodes: usize) -> crate::Result<Self> {
        let boundary = topo.boundary_loop.clone();
        let interior: Vec<usize> = (0..n_nodes).filter(|&v| !topo.is_boundary[v]).collect();
        let mut slot = vec![usize::MAX; n_nodes];
        for (k, &v) in boundary.iter().enumerate() {
            slot[v] = k;
        }
        for (k, &v) in interior.iter().enumerate() {
            slot[v] = k;
        }
        let (ni, nb) = (interior.len(), boundary.len());
        let mut l = DMatrix::zeros(ni, nb);
        if ni > 0 {
            let nbrs = topo.neighbors(n_nodes);
            let mut a = Triplets::new(ni);
            let mut rhs = DMatrix::<f64>::zeros(ni, nb);
            for (r, &v) in interior.iter().enumerate() {
                a.push(r, r, nbrs[v].len() as f64);
                for &w in &nbrs[v] {
                    if topo.is_boundary[w] {
                        rhs[(r, slot[w])] += 1.0;
                    } else if slot[w] < r {
                        a.push(r, slot[w], -1.0);
                    }
                }
            }
            let chol = EnvelopeCholesky::factor(&a.build(), None)
                .map_err(|_| crate::Error::numerical("interior Laplacian is singular (disconnected interior)"))?;
            for k in 0..nb {
                let col: Vec<f64> = rhs.column(k).iter().copied().collect();
                let x = chol.solve(&col)?;
                for r in 0..ni {
                    l[(r, k)] = x[r];
                }
            }
        }
        Ok(Self { boundary, interior, slot, l })
    }

    /// Interior rest positions for the boundary `b` (in loop order).
    pub fn apply(&self, b: &[P2]) -> Vec<P2> {
        (0..self.interior.len())
            .map(|r| {
                let mut p = P2::zeros();
                for (k, bk) in b.iter().enumerate() {
                    p += bk * self.l[(r, k)];
                }
                p
            })
            .collect()
    }

    /// Writes boundary and harmonic interior into a full node array.
    pub fn fill_rest(&self, b: &[P2], rest: &mut [P2]) {
        for (k, &v) in self.boundary.iter().enumerate() {
            rest[v] = b[k];
        }
        for (r, p) in self.apply(b).into_iter().enumerate() {
            rest[self.interior[r]] = p;
        }
    }
}
