//! Matched deformed/rest triangulations of a Bézier panel.
//!
//! A parameter-domain lattice is lifted to the patch and flattened with a
//! least-squares conformal map. The flattened boundary is resampled by arc
//! length, the interior filled with a triangular point lattice and
//! Delaunay-triangulated. Interior rest nodes are placed harmonically and all
//! nodes are mapped back through the flattened lattice to the patch.

use super::delaunay::{delaunay, distance_to_segment, point_in_polygon};
use super::harmonic::Harmonic;
use super::mesh::{Topology, TriPanelMesh, P2};
use crate::geometry::BezierPatch;
use crate::linalg::{EnvelopeCholesky, Triplets};
use crate::P3;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    /// Target number of boundary edges `M_b`.
    pub boundary_edges: usize,
    /// Maximum interior triangle area (mm²); defaults to an equilateral
    /// triangle with the boundary spacing as side.
    pub max_area: Option<f64>,
    /// Lattice resolution used for the flattening.
    pub lattice: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { boundary_edges: 100, max_area: None, lattice: 24 }
    }
}

impl MeshOptions {
    pub fn with_boundary_edges(boundary_edges: usize) -> Self {
        Self { boundary_edges, ..Self::default() }
    }
}

/// Patch lattice and its conformal flattening.
pub struct Flattening {
    pub n: usize,
    pub pos: Vec<P3>,
    pub flat: Vec<P2>,
    pub tris: Vec<[usize; 3]>,
}

fn cross2(a: &P2, b: &P2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Least-squares conformal map of a triangle mesh with two pinned nodes.
pub fn lscm(pos: &[P3], tris: &[[usize; 3]], pins: [(usize, P2); 2]) -> crate::Result<Vec<P2>> {
    let n = pos.len();
    let mut idx = vec![usize::MAX; 2 * n];
    let mut fixed = vec![0.0; 2 * n];
    for (v, p) in pins {
        idx[2 * v] = usize::MAX - 1;
        idx[2 * v + 1] = usize::MAX - 1;
        fixed[2 * v] = p.x;
        fixed[2 * v + 1] = p.y;
    }
    let mut nf = 0;
    for slot in idx.iter_mut() {
        if *slot == usize::MAX {
            *slot = nf;
            nf += 1;
        } else {
            *slot = usize::MAX;
        }
    }
    let mut a = Triplets::with_capacity(nf, tris.len() * 42);
    let mut rhs = vec![0.0; nf];
    for t in tris {
        let q = t.map(|i| pos[i]);
        let e1 = q[1] - q[0];
        let e2 = q[2] - q[0];
        let l1 = e1.norm();
        let xh = e1 / l1;
        let px = e2.dot(&xh);
        let py = (e2 - xh * px).norm();
        let area = 0.5 * l1 * py;
        if !(area > 1e-14) {
            return Err(crate::Error::numerical("degenerate lattice triangle during flattening"));
        }
        let p = [P2::zeros(), P2::new(l1, 0.0), P2::new(px, py)];
        let w = area.sqrt() / (2.0 * area);
        let grads: [P2; 3] = std::array::from_fn(|i| {
            let d = p[(i + 2) % 3] - p[(i + 1) % 3];
            P2::new(-d.y, d.x) * w
        });
        // u_x - v_y and u_y + v_x, scaled by sqrt(area)
        let rows: [[(usize, f64); 6]; 2] = [
            std::array::from_fn(|k| {
                let (i, c) = (k / 2, k % 2);
                (2 * t[i] + c, if c == 0 { grads[i].x } else { -grads[i].y })
            }),
            std::array::from_fn(|k| {
                let (i, c) = (k / 2, k % 2);
                (2 * t[i] + c, if c == 0 { grads[i].y } else { grads[i].x })
            }),
        ];
        for row in &rows {
            for (ka, &(da, ca)) in row.iter().enumerate() {
                let ia = idx[da];
                if ia == usize::MAX {
                    continue;
                }
                for &(db, cb) in &row[..=ka] {
                    let ib = idx[db];
                    if ib != usize::MAX {
                        a.push(ia, ib, ca * cb);
                    }
                }
                for &(db, cb) in row {
                    if idx[db] == usize::MAX {
                        rhs[ia] -= ca * cb * fixed[db];
                    }
                }
            }
        }
    }
    let chol = EnvelopeCholesky::factor(&a.build(), None)?;
    let z = chol.solve(&rhs)?;
    Ok((0..n)
        .map(|v| {
            let c = |k: usize| if idx[2 * v + k] == usize::MAX { fixed[2 * v + k] } else { z[idx[2 * v + k]] };
            P2::new(c(0), c(1))
        })
        .collect())
}

impl Flattening {
    pub fn new(patch: &BezierPatch, n: usize) -> crate::Result<Self> {
        let n = n.max(2);
        let mut pos = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                pos.push(patch.eval(i as f64 / n as f64, j as f64 / n as f64)?.position);
            }
        }
        let id = |i: usize, j: usize| i + (n + 1) * j;
        let mut tris = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let chord = (pos[id(n, 0)] - pos[id(0, 0)]).norm();
        let mut flat = lscm(&pos, &tris, [(id(0, 0), P2::zeros()), (id(n, 0), P2::new(chord, 0.0))])?;
        let (mut a3, mut a2) = (0.0, 0.0);
        for t in &tris {
            a3 += 0.5 * (pos[t[1]] - pos[t[0]]).cross(&(pos[t[2]] - pos[t[0]])).norm();
            let s = 0.5 * cross2(&(flat[t[1]] - flat[t[0]]), &(flat[t[2]] - flat[t[0]]));
            if !(s > 0.0) {
                return Err(crate::Error::numerical("self-intersecting flattening: patch outside the admissible range"));
            }
            a2 += s;
        }
        let k = (a3 / a2).sqrt();
        for p in flat.iter_mut() {
            *p *= k;
        }
        Ok(Self { n, pos, flat, tris })
    }

    /// Lattice triangle and barycentric weights containing `(u, v)`.
    pub fn locate_uv(&self, u: f64, v: f64) -> ([usize; 3], [f64; 3]) {
        let n = self.n;
        let su = (u * n as f64).clamp(0.0, n as f64);
        let sv = (v * n as f64).clamp(0.0, n as f64);
        let i = (su.floor() as usize).min(n - 1);
        let j = (sv.floor() as usize).min(n - 1);
        let (fu, fv) = (su - i as f64, sv - j as f64);
        let id = |i: usize, j: usize| i + (n + 1) * j;
        if fu >= fv {
            ([id(i, j), id(i + 1, j), id(i + 1, j + 1)], [1.0 - fu, fu - fv, fv])
        } else {
            ([id(i, j), id(i + 1, j + 1), id(i, j + 1)], [1.0 - fv, fu, fv - fu])
        }
    }

    /// Flattened image of a patch point: the 3D point is projected onto its
    /// lattice triangle and carried over with the same barycentric weights.
    pub fn flatten_point(&self, u: f64, v: f64, x: &P3) -> P2 {
        let (t, _) = self.locate_uv(u, v);
        let [a, b, c] = t.map(|i| self.pos[i]);
        let (e1, e2, d) = (b - a, c - a, x - a);
        let m = nalgebra::Matrix2::new(e1.dot(&e1), e1.dot(&e2), e1.dot(&e2), e2.dot(&e2));
        let r = nalgebra::Vector2::new(e1.dot(&d), e2.dot(&d));
        let bc = m.lu().solve(&r).unwrap_or_else(nalgebra::Vector2::zeros);
        let [fa, fb, fc] = t.map(|i| self.flat[i]);
        fa + (fb - fa) * bc.x + (fc - fa) * bc.y
    }

    /// Lattice triangle and barycentric weights of a flat point (nearest
    /// triangle if the point lies marginally outside).
    pub fn locate_flat(&self, p: &P2) -> ([usize; 3], [f64; 3]) {
        let mut best = (self.tris[0], [1.0, 0.0, 0.0], f64::NEG_INFINITY);
        for t in &self.tris {
            let [a, b, c] = t.map(|i| self.flat[i]);
            let area = cross2(&(b - a), &(c - a));
            let w = [cross2(&(c - b), &(p - b)) / area, cross2(&(a - c), &(p - c)) / area, cross2(&(b - a), &(p - a)) / area];
            let m = w[0].min(w[1]).min(w[2]);
            if m > best.2 {
                best = (*t, w, m);
                if m >= 0.0 {
                    break;
                }
            }
        }
        (best.0, best.1)
    }

    fn uv_of(&self, i: usize) -> [f64; 2] {
        let n = self.n as f64;
        [(i % (self.n + 1)) as f64 / n, (i / (self.n + 1)) as f64 / n]
    }

    /// Piecewise-linear lift of a flat point to 3D and to the parameter domain.
    pub fn lift(&self, p: &P2) -> (P3, [f64; 2]) {
        let (t, w) = self.locate_flat(p);
        let mut x = P3::zeros();
        let mut uv = [0.0; 2];
        for k in 0..3 {
            x += self.pos[t[k]] * w[k];
            let q = self.uv_of(t[k]);
            uv[0] += q[0] * w[k];
            uv[1] += q[1] * w[k];
        }
        (x, [uv[0].clamp(0.0, 1.0), uv[1].clamp(0.0, 1.0)])
    }
}

/// Boundary point `t ∈ [0, 1]` of curve `k` in the cyclic edge order.
pub fn edge_uv(k: usize, t: f64) -> [f64; 2] {
    match k {
        0 => [t, 0.0],
        1 => [1.0, t],
        2 => [1.0 - t, 1.0],
        _ => [0.0, 1.0 - t],
    }
}

struct ArcTable {
    t: Vec<f64>,
    s: Vec<f64>,
}

impl ArcTable {
    fn new(patch: &BezierPatch, k: usize) -> Self {
        let n = 512;
        let mut t = Vec::with_capacity(n + 1);
        let mut s = Vec::with_capacity(n + 1);
        let mut prev: Option<P3> = None;
        let mut acc = 0.0;
        for i in 0..=n {
            let ti = i as f64 / n as f64;
            let [u, v] = edge_uv(k, ti);
            let p = patch.position(u, v);
            if let Some(q) = prev {
                acc += (p - q).norm();
            }
            prev = Some(p);
            t.push(ti);
            s.push(acc);
        }
        Self { t, s }
    }

    fn length(&self) -> f64 {
        *self.s.last().unwrap()
    }

    fn param_at(&self, s: f64) -> f64 {
        let i = self.s.partition_point(|&x| x < s).clamp(1, self.s.len() - 1);
        let (s0, s1) = (self.s[i - 1], self.s[i]);
        let f = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        self.t[i - 1] + f * (self.t[i] - self.t[i - 1])
    }
}

/// Deformed panel mesh on `patch` with its matched planar rest mesh.
pub fn init_panel_mesh(patch: &BezierPatch, opts: &MeshOptions) -> crate::Result<TriPanelMesh> {
    if opts.boundary_edges < 8 {
        return Err(crate::Error::invalid("at least 8 boundary edges are required"));
    }
    let fl = Flattening::new(patch, opts.lattice)?;
    let tables: Vec<ArcTable> = (0..4).map(|k| ArcTable::new(patch, k)).collect();
    let total: f64 = tables.iter().map(|t| t.length()).sum();
    let mut bparams: Vec<(usize, f64)> = Vec::new();
    for (k, tab) in tables.iter().enumerate() {
        let nk = ((opts.boundary_edges as f64 * tab.length() / total).round() as usize).max(2);
        for j in 0..nk {
            bparams.push((k, tab.param_at(tab.length() * j as f64 / nk as f64)));
        }
    }
    let spacing_b = total / opts.boundary_edges as f64;
    let max_area = opts.max_area.unwrap_or(3f64.sqrt() / 4.0 * spacing_b * spacing_b);
    if !(max_area > 0.0) {
        return Err(crate::Error::invalid("max_area must be positive"));
    }
    let spacing = (4.0 * max_area / 3f64.sqrt()).sqrt();

    let mut attempt = 0;
    let (bx, bflat, interior_pts, tris) = loop {
        let bx: Vec<(P3, [f64; 2])> = bparams
            .iter()
            .map(|&(k, t)| {
                let uv = edge_uv(k, t);
                (patch.position(uv[0], uv[1]), uv)
            })
            .collect();
        let bflat: Vec<P2> = bx.iter().map(|(x, uv)| fl.flatten_point(uv[0], uv[1], x)).collect();
        let nb = bflat.len();
        let (mut lo, mut hi) = (bflat[0], bflat[0]);
        for p in &bflat {
            lo = P2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = P2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let dy = spacing * 3f64.sqrt() / 2.0;
        let mut interior_pts = Vec::new();
        let rows = ((hi.y - lo.y) / dy).ceil() as usize + 1;
        let cols = ((hi.x - lo.x) / spacing).ceil() as usize + 2;
        for r in 0..rows {
            for c in 0..cols {
                let p = P2::new(lo.x + spacing * (c as f64 + 0.5 * (r % 2) as f64), lo.y + dy * r as f64);
                if !point_in_polygon(&p, &bflat) {
                    continue;
                }
                let near = (0..nb).any(|i| distance_to_segment(&p, &bflat[i], &bflat[(i + 1) % nb]) < 0.6 * spacing);
                if !near {
                    interior_pts.push(p);
                }
            }
        }
        let mut pts = bflat.clone();
        pts.extend_from_slice(&interior_pts);
        let all = delaunay(&pts);
        let tris: Vec<[usize; 3]> = all
            .into_iter()
            .filter(|t| {
                let c = (pts[t[0]] + pts[t[1]] + pts[t[2]]) / 3.0;
                point_in_polygon(&c, &bflat)
            })
            .collect();
        let mut present: HashSet<(usize, usize)> = HashSet::new();
        for t in &tris {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                present.insert((a.min(b), a.max(b)));
            }
        }
        let missing: Vec<usize> = (0..nb).filter(|&i| !present.contains(&(i.min((i + 1) % nb), i.max((i + 1) % nb)))).collect();
        if missing.is_empty() {
            break (bx, bflat, interior_pts, tris);
        }
        attempt += 1;
        if attempt > 8 {
            return Err(crate::Error::numerical("boundary recovery failed during triangulation"));
        }
        for &i in missing.iter().rev() {
            let (k, t0) = bparams[i];
            let (k1, t1) = bparams[(i + 1) % nb];
            let t1 = if k1 == k { t1 } else { 1.0 };
            bparams.insert(i + 1, (k, 0.5 * (t0 + t1)));
        }
    };

    let nb = bflat.len();
    let n_nodes = nb + interior_pts.len();
    // drop interior points not used by any triangle
    let mut used = vec![false; n_nodes];
    for t in &tris {
        for &v in t {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; n_nodes];
    let mut next = 0;
    for v in 0..n_nodes {
        if v < nb || used[v] {
            remap[v] = next;
            next += 1;
        }
    }
    let tris: Vec<[usize; 3]> = tris.iter().map(|t| t.map(|v| remap[v])).collect();
    let n_nodes = next;
    let topo = Topology::new(n_nodes, tris)?;
    if topo.boundary_loop.len() != nb {
        return Err(crate::Error::numerical("triangulation lost boundary nodes"));
    }
    let harmonic = Harmonic::new(&topo, n_nodes)?;
    let bloop: Vec<P2> = topo.boundary_loop.iter().map(|&v| bflat[v]).collect();
    let mut rest = vec![P2::zeros(); n_nodes];
    harmonic.fill_rest(&bloop, &mut rest);
    let mut x = vec![P3::zeros(); n_nodes];
    let mut uv = vec![[0.0; 2]; n_nodes];
    for v in 0..n_nodes {
        if v < nb {
            x[v] = bx[v].0;
            uv[v] = bx[v].1;
        } else {
            let (p, q) = fl.lift(&rest[v]);
            x[v] = p;
            uv[v] = q;
        }
    }
    // rest pose: boundary centroid at the origin, node 0 on the +x axis
    let c = bloop.iter().sum::<P2>() / nb as f64;
    let d = rest[topo.boundary_loop[0]] - c;
    let ang = d.y.atan2(d.x);
    let rot = nalgebra::Rotation2::new(-ang);
    for p in rest.iter_mut() {
        *p = rot * (*p - c);
    }
    let m = topo.n_edges();
    let mesh = TriPanelMesh { topo, x, rest, phi: vec![0.0; m], uv };
    for t in 0..mesh.topo.tris.len() {
        if !(mesh.rest_area(t) > 0.0) {
            return Err(crate::Error::numerical("inverted rest triangle after harmonic placement"));
        }
    }
    Ok(mesh)
}
