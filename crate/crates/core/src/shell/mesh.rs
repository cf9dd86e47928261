//! Triangulated panel: topology, deformed nodes, planar rest nodes and
//! per-edge mid-edge normal deviations.

use super::element::ElementInput;
use crate::P3;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub type P2 = Vector2<f64>;

pub const NONE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Counter-clockwise in the rest plane.
    pub tris: Vec<[usize; 3]>,
    /// Stored as `[a, b]`; the "left" triangle contains `a -> b`.
    pub edges: Vec<[usize; 2]>,
    /// `[left, right]`, `NONE` where absent.
    pub edge_tris: Vec<[usize; 2]>,
    /// Edge opposite each triangle vertex.
    pub tri_edges: Vec<[usize; 3]>,
    /// `+1` if the triangle is the left one of that edge, `-1` otherwise.
    pub tri_edge_sign: Vec<[f64; 3]>,
    /// Boundary nodes in counter-clockwise order.
    pub boundary_loop: Vec<usize>,
    pub is_boundary: Vec<bool>,
}

impl Topology {
    pub fn new(n_nodes: usize, tris: Vec<[usize; 3]>) -> crate::Result<Self> {
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_tris: Vec<[usize; 2]> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut tri_edges = Vec::with_capacity(tris.len());
        let mut tri_edge_sign = Vec::with_capacity(tris.len());
        for (t, tri) in tris.iter().enumerate() {
            if tri.iter().any(|&v| v >= n_nodes) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(crate::Error::invalid(format!("triangle {t} is malformed")));
            }
            let mut te = [0usize; 3];
            let mut ts = [0.0; 3];
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    None => {
                        lookup.insert(key, edges.len());
                        edges.push([a, b]);
                        edge_tris.push([t, NONE]);
                        te[k] = edges.len() - 1;
                        ts[k] = 1.0;
                    }
                    Some(&e) => {
                        if edge_tris[e][1] != NONE || edges[e] != [b, a] {
                            return Err(crate::Error::invalid(format!(
                                "edge ({a}, {b}) is non-manifold or inconsistently oriented"
                            )));
                        }
                        edge_tris[e][1] = t;
                        te[k] = e;
                        ts[k] = -1.0;
                    }
                }
            }
            tri_edges.push(te);
            tri_edge_sign.push(ts);
        }
        let mut next = vec![NONE; n_nodes];
        let mut is_boundary = vec![false; n_nodes];
        for (e, et) in edge_tris.iter().enumerate() {
            if et[1] == NONE {
                let [a, b] = edges[e];
                if next[a] != NONE {
                    return Err(crate::Error::invalid("boundary is not a single simple loop"));
                }
                next[a] = b;
                is_boundary[a] = true;
                is_boundary[b] = true;
            }
        }
        let start = (0..n_nodes).find(|&v| is_boundary[v]).ok_or_else(|| crate::Error::invalid("mesh has no boundary"))?;
        let mut boundary_loop = vec![start];
        let mut cur = next[start];
        while cur != start {
            if cur == NONE || boundary_loop.len() > n_nodes {
                return Err(crate::Error::invalid("boundary is not a single simple loop"));
            }
            boundary_loop.push(cur);
            cur = next[cur];
        }
        if boundary_loop.len() != is_boundary.iter().filter(|&&b| b).count() {
            return Err(crate::Error::invalid("boundary consists of several loops"));
        }
        Ok(Self { tris, edges, edge_tris, tri_edges, tri_edge_sign, boundary_loop, is_boundary })
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Vertex of triangle `t` opposite its local edge `k` is `tris[t][k]`;
    /// this returns the vertex across that edge in the neighbouring triangle.
    pub fn opposite_vertex(&self, t: usize, k: usize) -> Option<usize> {
        let e = self.tri_edges[t][k];
        let [l, r] = self.edge_tris[e];
        let other = if l == t { r } else { l };
        if other == NONE {
            return None;
        }
        let tri = self.tris[other];
        let [a, b] = self.edges[e];
        tri.iter().copied().find(|&v| v != a && v != b)
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_tris[e][1] == NONE
    }

    /// Node adjacency lists.
    pub fn neighbors(&self, n_nodes: usize) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); n_nodes];
        for &[a, b] in &self.edges {
            nb[a].push(b);
            nb[b].push(a);
        }
        nb
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriPanelMesh {
    pub topo: Topology,
    /// Deformed node positions (mm).
    pub x: Vec<P3>,
    /// Planar rest node positions (mm).
    pub rest: Vec<P2>,
    /// Mid-edge normal deviations (rad), one per edge.
    pub phi: Vec<f64>,
    /// Parameter-domain coordinates of the nodes on the initial patch.
    pub uv: Vec<[f64; 2]>,
}

impl TriPanelMesh {
    pub fn n_nodes(&self) -> usize {
        self.x.len()
    }

    /// `3N + M` as in the discrete shell state vector.
    pub fn dof_count(&self) -> usize {
        3 * self.x.len() + self.topo.n_edges()
    }

    /// Local energy inputs of triangle `t`.
    pub fn element_input(&self, t: usize) -> ElementInput {
        let topo = &self.topo;
        let tri = topo.tris[t];
        ElementInput {
            x: tri.map(|v| self.x[v]),
            opp: std::array::from_fn(|k| topo.opposite_vertex(t, k).map(|v| self.x[v])),
            phi: topo.tri_edges[t].map(|e| self.phi[e]),
            sign: topo.tri_edge_sign[t],
            rest: tri.map(|v| self.rest[v]),
        }
    }

    pub fn rest_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.topo.tris[t].map(|i| self.rest[i]);
        0.5 * ((b - a).x * (c - a).y - (b - a).y * (c - a).x)
    }

    pub fn deformed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.topo.tris[t].map(|i| self.x[i]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Area-weighted vertex normals of the deformed mesh.
    pub fn vertex_normals(&self) -> Vec<P3> {
        let mut n = vec![P3::zeros(); self.x.len()];
        for tri in &self.topo.tris {
            let [a, b, c] = tri.map(|i| self.x[i]);
            let w = (b - a).cross(&(c - a));
            for &v in tri {
                n[v] += w;
            }
        }
        n.into_iter().map(|v| v.try_normalize(0.0).unwrap_or(P3::z())).collect()
    }

    /// One third of the incident deformed triangle areas per node.
    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.x.len()];
        for t in 0..self.topo.tris.len() {
            let at = self.deformed_area(t) / 3.0;
            for &v in &self.topo.tris[t] {
                a[v] += at;
            }
        }
        a
    }

    /// Hex SHA-256 of the topology and rest/deformed coordinates.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for t in &self.topo.tris {
            for &v in t {
                h.update((v as u64).to_le_bytes());
            }
        }
        for p in &self.x {
            for c in p.iter() {
                h.update(c.to_le_bytes());
            }
        }
        for p in &self.rest {
            for c in p.iter() {
                h.update(c.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}
