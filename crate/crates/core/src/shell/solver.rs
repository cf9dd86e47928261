//! Minimal-energy panel solve.
//!
//! Unknowns are the interior deformed nodes, all mid-edge normal deviations
//! and the rest boundary `b̄`; the rest interior follows harmonically from
//! `b̄`. The deformed boundary stays on the Bézier curves. Damped Newton on
//! `W + R`, where `R` softly pins the rest centroid and rotation. The sparse
//! block over `[x_free, φ]` is factored with an envelope Cholesky and the
//! dense `b̄` border is eliminated through its Schur complement.

use super::element::{element_energy, element_gradient, element_hessian, ElementInput, LOCAL_DOFS};
use super::harmonic::Harmonic;
use super::material::MaterialParams;
use super::mesh::{Topology, TriPanelMesh, NONE, P2};
use super::stress::{aggregate_stress, max_engineering_stress, stress_field, StressField, STRESS_NORM_P};
use crate::linalg::{EnvelopeCholesky, LinalgError, SymSparse, Triplets};
use crate::P3;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Converged when `‖∇‖∞ < tol_grad · max(1, W)`.
    pub tol_grad: f64,
    /// ... or when a step decreases the energy by less than this fraction.
    pub tol_rel_energy: f64,
    pub max_iter: usize,
    /// Soft-constraint weight in units of `μ h`.
    pub reg_weight: f64,
    /// Random restarts from saddle points.
    pub stability_attempts: usize,
    pub seed: u64,
    /// Keep every deformed node in place and relax only `φ` and the rest.
    pub fix_deformed: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol_grad: 1e-6, tol_rel_energy: 1e-12, max_iter: 500, reg_weight: 1e-2, stability_attempts: 3, seed: 7, fix_deformed: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    EnergyStall,
    LineSearchStall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub grad_inf: f64,
    pub initial_energy: f64,
    pub shifted_factorizations: usize,
    pub perturbations: usize,
    /// Unshifted Hessian positive definite at the returned state.
    pub stable: bool,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelEquilibrium {
    pub mesh: TriPanelMesh,
    pub energy: f64,
    pub membrane: f64,
    pub bending: f64,
    /// Aggregated stress `σ` (MPa).
    pub sigma: f64,
    /// Maximal engineering stress `σ_true` (MPa).
    pub sigma_true: f64,
    pub stress: StressField,
    pub stats: SolverStats,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("panel solve did not converge after {iterations} iterations (|grad| = {grad_inf:e})")]
    NotConverged { iterations: usize, grad_inf: f64, last: Box<PanelEquilibrium> },
    #[error(transparent)]
    Core(#[from] crate::Error),
}

impl From<SolveError> for crate::Error {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Core(e) => e,
            other => crate::Error::numerical(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Energy {
    total: f64,
    membrane: f64,
    bending: f64,
}

struct Problem {
    topo: Topology,
    uv: Vec<[f64; 2]>,
    m: MaterialParams,
    w_reg: f64,
    harmonic: Harmonic,
    tris: Vec<[usize; 3]>,
    opp: Vec<[usize; 3]>,
    tri_edges: Vec<[usize; 3]>,
    signs: Vec<[f64; 3]>,
    /// node -> first `A` index of its free coordinates
    ax: Vec<usize>,
    n_x: usize,
    n_a: usize,
    n_b: usize,
    /// transposed map from `b̄` to rest coordinates (2Nb × 2N)
    st: DMatrix<f64>,
    fd_step: f64,
}

#[derive(Clone)]
struct State {
    x: Vec<P3>,
    phi: Vec<f64>,
    b: Vec<P2>,
    rest: Vec<P2>,
}

impl Problem {
    fn new(mesh: &TriPanelMesh, m: &MaterialParams, opts: &SolverOptions) -> crate::Result<Self> {
        let topo = &mesh.topo;
        let n = mesh.n_nodes();
        let harmonic = Harmonic::new(topo, n)?;
        let mut ax = vec![NONE; n];
        let mut n_x = 0;
        if !opts.fix_deformed {
            for &v in &harmonic.interior {
                ax[v] = n_x;
                n_x += 3;
            }
        }
        let n_a = n_x + topo.n_edges();
        let n_b = 2 * harmonic.boundary.len();
        let mut st = DMatrix::zeros(n_b, 2 * n);
        for (k, &v) in harmonic.boundary.iter().enumerate() {
            st[(2 * k, 2 * v)] = 1.0;
            st[(2 * k + 1, 2 * v + 1)] = 1.0;
        }
        for (r, &v) in harmonic.interior.iter().enumerate() {
            for k in 0..harmonic.boundary.len() {
                let l = harmonic.l[(r, k)];
                st[(2 * k, 2 * v)] = l;
                st[(2 * k + 1, 2 * v + 1)] = l;
            }
        }
        let opp = (0..topo.tris.len())
            .map(|t| std::array::from_fn(|k| topo.opposite_vertex(t, k).unwrap_or(NONE)))
            .collect();
        let mean_edge = topo.edges.iter().map(|&[a, b]| (mesh.rest[a] - mesh.rest[b]).norm()).sum::<f64>() / topo.n_edges() as f64;
        Ok(Self {
            topo: topo.clone(),
            uv: mesh.uv.clone(),
            m: *m,
            w_reg: opts.reg_weight * m.mu * m.h,
            harmonic,
            tris: topo.tris.clone(),
            opp,
            tri_edges: topo.tri_edges.clone(),
            signs: topo.tri_edge_sign.clone(),
            ax,
            n_x,
            n_a,
            n_b,
            st,
            fd_step: 1e-6 * mean_edge,
        })
    }

    fn state(&self, mesh: &TriPanelMesh) -> State {
        let b: Vec<P2> = self.harmonic.boundary.iter().map(|&v| mesh.rest[v]).collect();
        let mut rest = mesh.rest.clone();
        self.harmonic.fill_rest(&b, &mut rest);
        State { x: mesh.x.clone(), phi: mesh.phi.clone(), b, rest }
    }

    fn input(&self, s: &State, t: usize) -> ElementInput {
        let tri = self.tris[t];
        ElementInput {
            x: tri.map(|v| s.x[v]),
            opp: self.opp[t].map(|v| (v != NONE).then(|| s.x[v])),
            phi: self.tri_edges[t].map(|e| s.phi[e]),
            sign: self.signs[t],
            rest: tri.map(|v| s.rest[v]),
        }
    }

    fn reg(&self, b: &[P2]) -> f64 {
        let c = b.iter().sum::<P2>() / b.len() as f64;
        0.5 * self.w_reg * (c.norm_squared() + b[0].y * b[0].y)
    }

    fn energy(&self, s: &State) -> Option<Energy> {
        let mut e = Energy::default();
        for t in 0..self.tris.len() {
            let g = element_energy(&self.input(s, t), &self.m)?;
            e.total += g;
        }
        e.total += self.reg(&s.b);
        Some(e)
    }

    fn energy_split(&self, s: &State) -> Option<Energy> {
        let mut e = Energy::default();
        for t in 0..self.tris.len() {
            let g = element_gradient(&self.input(s, t), &self.m)?;
            e.membrane += g.membrane;
            e.bending += g.bending;
        }
        e.total = e.membrane + e.bending + self.reg(&s.b);
        Some(e)
    }

    /// Gradient over `[A | B]`.
    fn gradient(&self, s: &State) -> Option<(f64, Vec<f64>)> {
        let n = s.x.len();
        let mut g = vec![0.0; self.n_a + self.n_b];
        let mut g_rest = vec![0.0; 2 * n];
        let mut w = 0.0;
        for t in 0..self.tris.len() {
            let eg = element_gradient(&self.input(s, t), &self.m)?;
            w += eg.energy;
            let tri = self.tris[t];
            for k in 0..3 {
                let v = tri[k];
                if self.ax[v] != NONE {
                    for c in 0..3 {
                        g[self.ax[v] + c] += eg.x[k][c];
                    }
                }
                let o = self.opp[t][k];
                if o != NONE && self.ax[o] != NONE {
                    for c in 0..3 {
                        g[self.ax[o] + c] += eg.opp[k][c];
                    }
                }
                g[self.n_x + self.tri_edges[t][k]] += eg.phi[k];
                g_rest[2 * v] += eg.rest[k].x;
                g_rest[2 * v + 1] += eg.rest[k].y;
            }
        }
        let gb = &self.st * DVector::from_vec(g_rest);
        for j in 0..self.n_b {
            g[self.n_a + j] = gb[j];
        }
        let nb = s.b.len();
        let c = s.b.iter().sum::<P2>() / nb as f64;
        for k in 0..nb {
            g[self.n_a + 2 * k] += self.w_reg * c.x / nb as f64;
            g[self.n_a + 2 * k + 1] += self.w_reg * c.y / nb as f64;
        }
        g[self.n_a + 1] += self.w_reg * s.b[0].y;
        Some((w + self.reg(&s.b), g))
    }

    fn hessian(&self, s: &State) -> Option<(SymSparse, DMatrix<f64>, DMatrix<f64>)> {
        let n = s.x.len();
        let mut haa = Triplets::with_capacity(self.n_a, self.tris.len() * 21 * 11);
        let mut har: Vec<(usize, usize, f64)> = Vec::with_capacity(self.tris.len() * 21 * 6);
        let mut hrr: Vec<(usize, usize, f64)> = Vec::with_capacity(self.tris.len() * 36);
        let mut steps = [self.fd_step; LOCAL_DOFS];
        for st in steps.iter_mut().take(21).skip(18) {
            *st = 1e-7;
        }
        let mut idx = [NONE; LOCAL_DOFS];
        let mut ridx = [NONE; LOCAL_DOFS];
        for t in 0..self.tris.len() {
            let h = element_hessian(&self.input(s, t), &self.m, &steps)?;
            let tri = self.tris[t];
            idx.fill(NONE);
            ridx.fill(NONE);
            for k in 0..3 {
                let v = tri[k];
                if self.ax[v] != NONE {
                    for c in 0..3 {
                        idx[3 * k + c] = self.ax[v] + c;
                    }
                }
                let o = self.opp[t][k];
                if o != NONE && self.ax[o] != NONE {
                    for c in 0..3 {
                        idx[9 + 3 * k + c] = self.ax[o] + c;
                    }
                }
                idx[18 + k] = self.n_x + self.tri_edges[t][k];
                ridx[21 + 2 * k] = 2 * v;
                ridx[22 + 2 * k] = 2 * v + 1;
            }
            haa.push_block(&idx, &h);
            for i in 0..21 {
                if idx[i] == NONE {
                    continue;
                }
                for j in 21..LOCAL_DOFS {
                    har.push((idx[i], ridx[j], h[i * LOCAL_DOFS + j]));
                }
            }
            for i in 21..LOCAL_DOFS {
                for j in 21..LOCAL_DOFS {
                    hrr.push((ridx[i], ridx[j], h[i * LOCAL_DOFS + j]));
                }
            }
        }
        let mut gt = DMatrix::<f64>::zeros(self.n_b, self.n_a);
        for (a, r, v) in har {
            gt.column_mut(a).axpy(v, &self.st.column(r), 1.0);
        }
        let mut zt = DMatrix::<f64>::zeros(self.n_b, 2 * n);
        for (i, j, v) in hrr {
            zt.column_mut(i).axpy(v, &self.st.column(j), 1.0);
        }
        let mut hbb = &zt * self.st.transpose();
        let g = gt.transpose();
        let nb = s.b.len();
        let w = self.w_reg / (nb * nb) as f64;
        for i in 0..nb {
            for j in 0..nb {
                hbb[(2 * i, 2 * j)] += w;
                hbb[(2 * i + 1, 2 * j + 1)] += w;
            }
        }
        hbb[(1, 1)] += self.w_reg;
        Some((haa.build(), g, hbb))
    }

    fn apply(&self, s: &State, d: &[f64], alpha: f64) -> State {
        let mut out = s.clone();
        for (v, &a) in self.ax.iter().enumerate() {
            if a != NONE {
                out.x[v] += P3::new(d[a], d[a + 1], d[a + 2]) * alpha;
            }
        }
        for (e, p) in out.phi.iter_mut().enumerate() {
            *p += alpha * d[self.n_x + e];
        }
        for (k, b) in out.b.iter_mut().enumerate() {
            *b += P2::new(d[self.n_a + 2 * k], d[self.n_a + 2 * k + 1]) * alpha;
        }
        self.harmonic.fill_rest(&out.b, &mut out.rest);
        out
    }
}

/// Factorization of the bordered Hessian `[H_AA G; Gᵀ H_BB]`.
struct Bordered {
    a: EnvelopeCholesky,
    g: DMatrix<f64>,
    c: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Bordered {
    fn factor(haa: &SymSparse, g: DMatrix<f64>, hbb: &DMatrix<f64>, tau: f64) -> Result<Self, LinalgError> {
        let shift = (tau > 0.0).then(|| {
            let d = haa.diag();
            let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            d.iter().map(|v| tau * (v.abs() + 1e-8 * scale)).collect::<Vec<f64>>()
        });
        let a = EnvelopeCholesky::factor(haa, shift.as_deref())?;
        let w = a.half_solve_many(&g)?;
        let mut c = hbb - w.transpose() * &w;
        if tau > 0.0 {
            let scale = (0..c.nrows()).fold(0.0f64, |m, i| m.max(hbb[(i, i)].abs())).max(1e-300);
            for i in 0..c.nrows() {
                c[(i, i)] += tau * (hbb[(i, i)].abs() + 1e-8 * scale);
            }
        }
        let c = c.cholesky().ok_or(LinalgError::NotPositiveDefinite { pivot: usize::MAX, value: f64::NAN })?;
        Ok(Self { a, g, c })
    }

    fn solve(&self, rhs: &[f64], n_a: usize) -> Result<Vec<f64>, LinalgError> {
        let ra = &rhs[..n_a];
        let rb = DVector::from_column_slice(&rhs[n_a..]);
        let za = DVector::from_vec(self.a.solve(ra)?);
        let db = self.c.solve(&(rb - self.g.tr_mul(&za)));
        let ra2: Vec<f64> = ra.iter().zip((&self.g * &db).iter()).map(|(r, y)| r - y).collect();
        let mut out = self.a.solve(&ra2)?;
        out.extend(db.iter());
        Ok(out)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes the panel energy starting from `mesh`.
pub fn minimize_panel(mesh: &TriPanelMesh, m: &MaterialParams, opts: &SolverOptions) -> Result<PanelEquilibrium, SolveError> {
    let prob = Problem::new(mesh, m, opts)?;
    let mut s = prob.state(mesh);
    let e0 = prob.energy(&s).ok_or_else(|| crate::Error::numerical("initial mesh is inverted or degenerate"))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let mut stats = SolverStats {
        iterations: 0,
        grad_inf: f64::INFINITY,
        initial_energy: e0.total,
        shifted_factorizations: 0,
        perturbations: 0,
        stable: false,
        termination: Termination::Gradient,
    };
    let char_len = prob.fd_step * 1e6;
    let mut converged = false;
    while stats.iterations < opts.max_iter {
        let (w, g) = prob.gradient(&s).ok_or_else(|| crate::Error::numerical("degenerate state during solve"))?;
        stats.grad_inf = inf_norm(&g);
        let tol = opts.tol_grad * w.abs().max(1.0);
        let mut term = None;
        if stats.grad_inf < tol {
            term = Some(Termination::Gradient);
        }
        let (haa, gm, hbb) = prob.hessian(&s).ok_or_else(|| crate::Error::numerical("degenerate state during solve"))?;
        let mut tau = 0.0;
        let fac = loop {
            match Bordered::factor(&haa, gm.clone(), &hbb, tau) {
                Ok(f) => break f,
                Err(_) => {
                    tau = if tau == 0.0 { 1e-8 } else { tau * 10.0 };
                    if tau > 1e6 {
                        return Err(crate::Error::numerical("Hessian shift did not produce a positive definite system").into());
                    }
                }
            }
        };
        let indefinite = tau > 0.0;
        if let Some(t) = term {
            if !indefinite || stats.perturbations >= opts.stability_attempts {
                stats.termination = t;
                stats.stable = !indefinite;
                converged = true;
                break;
            }
            // saddle point: push off along a random direction
            stats.perturbations += 1;
            let d: Vec<f64> = (0..prob.n_a + prob.n_b)
                .map(|i| if i < prob.n_x { 1e-3 * char_len * { let z: f64 = StandardNormal.sample(&mut rng); z } } else { 0.0 })
                .collect();
            if let Some(e) = prob.energy(&prob.apply(&s, &d, 1.0)) {
                log::debug!("saddle at W = {w:.6e}; perturbed to {:.6e}", e.total);
                s = prob.apply(&s, &d, 1.0);
            }
            stats.iterations += 1;
            continue;
        }
        if indefinite {
            stats.shifted_factorizations += 1;
        }
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut d = fac.solve(&neg, prob.n_a).map_err(crate::Error::from)?;
        let mut slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            d = neg.clone();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = prob.apply(&s, &d, alpha);
            if let Some(e) = prob.energy(&trial) {
                if e.total <= w + 1e-4 * alpha * slope {
                    accepted = Some((trial, e.total));
                    break;
                }
            }
            alpha *= 0.5;
        }
        stats.iterations += 1;
        match accepted {
            Some((trial, wn)) => {
                let dec = (w - wn) / w.abs().max(1e-300);
                s = trial;
                if dec < opts.tol_rel_energy && stats.grad_inf < 1e3 * tol {
                    let (_, g2) = prob.gradient(&s).unwrap_or((wn, g.clone()));
                    stats.grad_inf = inf_norm(&g2);
                    stats.termination = Termination::EnergyStall;
                    stats.stable = !indefinite;
                    converged = true;
                    break;
                }
            }
            None => {
                if stats.grad_inf < 1e3 * tol {
                    stats.termination = Termination::LineSearchStall;
                    stats.stable = !indefinite;
                    converged = true;
                    break;
                }
                return Err(SolveError::NotConverged {
                    iterations: stats.iterations,
                    grad_inf: stats.grad_inf,
                    last: Box::new(finish(&prob, s, m, stats.clone())?),
                });
            }
        }
    }
    if !converged {
        return Err(SolveError::NotConverged {
            iterations: stats.iterations,
            grad_inf: stats.grad_inf,
            last: Box::new(finish(&prob, s, m, stats.clone())?),
        });
    }
    Ok(finish(&prob, s, m, stats)?)
}

fn finish(prob: &Problem, s: State, m: &MaterialParams, stats: SolverStats) -> crate::Result<PanelEquilibrium> {
    let e = prob.energy_split(&s).ok_or_else(|| crate::Error::numerical("degenerate final state"))?;
    let State { x, phi, rest, .. } = s;
    let mesh = TriPanelMesh { topo: prob.topo.clone(), x, rest, phi, uv: prob.uv.clone() };
    let stress = stress_field(&mesh, m)?;
    Ok(PanelEquilibrium {
        sigma: aggregate_stress(&stress, STRESS_NORM_P),
        sigma_true: max_engineering_stress(&stress),
        mesh,
        energy: e.membrane + e.bending,
        membrane: e.membrane,
        bending: e.bending,
        stress,
        stats,
    })
}

/// Sizes of the unknown blocks `[x_free (3 per interior node), φ, b̄]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofLayout {
    pub n_x: usize,
    pub n_phi: usize,
    pub n_b: usize,
}

/// The objective `W + R` of a panel solve as a function of its unknowns.
pub struct PanelEnergy {
    prob: Problem,
    base: State,
    z0: Vec<f64>,
}

impl PanelEnergy {
    pub fn new(mesh: &TriPanelMesh, m: &MaterialParams, opts: &SolverOptions) -> crate::Result<Self> {
        let prob = Problem::new(mesh, m, opts)?;
        let base = prob.state(mesh);
        let mut z0 = vec![0.0; prob.n_a + prob.n_b];
        for (v, &a) in prob.ax.iter().enumerate() {
            if a != NONE {
                z0[a..a + 3].copy_from_slice(base.x[v].as_slice());
            }
        }
        z0[prob.n_x..prob.n_a].copy_from_slice(&base.phi);
        for (k, b) in base.b.iter().enumerate() {
            z0[prob.n_a + 2 * k] = b.x;
            z0[prob.n_a + 2 * k + 1] = b.y;
        }
        Ok(Self { prob, base, z0 })
    }

    pub fn layout(&self) -> DofLayout {
        DofLayout { n_x: self.prob.n_x, n_phi: self.prob.n_a - self.prob.n_x, n_b: self.prob.n_b }
    }

    /// Unknowns of the mesh this was built from.
    pub fn dofs(&self) -> Vec<f64> {
        self.z0.clone()
    }

    fn state(&self, z: &[f64]) -> State {
        let d: Vec<f64> = z.iter().zip(&self.z0).map(|(a, b)| a - b).collect();
        self.prob.apply(&self.base, &d, 1.0)
    }

    /// `W + R`, `None` for inverted or degenerate states.
    pub fn value(&self, z: &[f64]) -> Option<f64> {
        self.prob.energy(&self.state(z)).map(|e| e.total)
    }

    /// Strain energy `W` alone.
    pub fn strain_energy(&self, z: &[f64]) -> Option<f64> {
        self.prob.energy_split(&self.state(z)).map(|e| e.membrane + e.bending)
    }

    pub fn gradient(&self, z: &[f64]) -> Option<Vec<f64>> {
        self.prob.gradient(&self.state(z)).map(|(_, g)| g)
    }

    /// Mesh holding the state `z`.
    pub fn mesh(&self, z: &[f64]) -> TriPanelMesh {
        let s = self.state(z);
        TriPanelMesh { topo: self.prob.topo.clone(), x: s.x, rest: s.rest, phi: s.phi, uv: self.prob.uv.clone() }
    }
}
