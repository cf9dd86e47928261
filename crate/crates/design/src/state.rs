//! Design variables and their flat layout.
//!
//! Unknowns are ordered vertices (3 each), edge plane vectors `s_e` (3 each),
//! tangent angles (2 per edge, at `edges[e][0]` then `edges[e][1]`), one stress
//! slack per face and one angle slack per tangent angle.

use crate::topology::Topology;
use coldbend_core::geometry::{EdgeCurveParams, PanelBoundary, QuadBaseMesh};
use coldbend_core::P3;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignState {
    pub vertices: Vec<P3>,
    pub faces: Vec<[usize; 4]>,
    pub s: Vec<P3>,
    pub theta: Vec<[f64; 2]>,
    pub u_face: Vec<f64>,
    pub u_theta: Vec<[f64; 2]>,
    /// Selected mixture component per face.
    pub modes: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub nv: usize,
    pub ne: usize,
    pub nf: usize,
}

impl Layout {
    pub fn of(mesh: &QuadBaseMesh) -> Self {
        Self { nv: mesh.vertices.len(), ne: mesh.edges.len(), nf: mesh.faces.len() }
    }
    pub fn vertex(&self, v: usize) -> usize {
        3 * v
    }
    pub fn s(&self, e: usize) -> usize {
        3 * self.nv + 3 * e
    }
    pub fn theta(&self, e: usize, end: usize) -> usize {
        3 * self.nv + 3 * self.ne + 2 * e + end
    }
    pub fn u_face(&self, f: usize) -> usize {
        3 * self.nv + 5 * self.ne + f
    }
    pub fn u_theta(&self, e: usize, end: usize) -> usize {
        3 * self.nv + 5 * self.ne + self.nf + 2 * e + end
    }
    pub fn len(&self) -> usize {
        3 * self.nv + 7 * self.ne + self.nf
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Number of local unknowns of one face: 4 corners, 4 plane vectors, 8 angles.
pub const FACE_DOFS: usize = 32;

impl DesignState {
    /// Base mesh with the current vertex positions.
    pub fn mesh(&self) -> crate::Result<QuadBaseMesh> {
        Ok(QuadBaseMesh::new(self.vertices.clone(), self.faces.clone())?)
    }

    pub fn topology(&self) -> crate::Result<Topology> {
        Ok(Topology::new(&self.mesh()?))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(3 * self.vertices.len() + 7 * self.s.len() + self.u_face.len());
        x.extend(self.vertices.iter().flat_map(|v| v.iter().copied()));
        x.extend(self.s.iter().flat_map(|v| v.iter().copied()));
        x.extend(self.theta.iter().flat_map(|t| t.iter().copied()));
        x.extend(self.u_face.iter().copied());
        x.extend(self.u_theta.iter().flat_map(|t| t.iter().copied()));
        x
    }

    pub fn set_from(&mut self, x: &[f64]) {
        let (nv, ne, nf) = (self.vertices.len(), self.s.len(), self.u_face.len());
        let l = Layout { nv, ne, nf };
        assert_eq!(x.len(), l.len());
        for v in 0..nv {
            let i = l.vertex(v);
            self.vertices[v] = P3::new(x[i], x[i + 1], x[i + 2]);
        }
        for e in 0..ne {
            let i = l.s(e);
            self.s[e] = P3::new(x[i], x[i + 1], x[i + 2]);
            self.theta[e] = [x[l.theta(e, 0)], x[l.theta(e, 1)]];
            self.u_theta[e] = [x[l.u_theta(e, 0)], x[l.u_theta(e, 1)]];
        }
        for f in 0..nf {
            self.u_face[f] = x[l.u_face(f)];
        }
    }

    pub fn layout(&self) -> Layout {
        Layout { nv: self.vertices.len(), ne: self.s.len(), nf: self.u_face.len() }
    }

    /// Global indices of the local face unknowns, in the order used by
    /// [`DesignState::face_local`].
    pub fn face_dofs(&self, topo: &Topology, f: usize) -> [usize; FACE_DOFS] {
        let l = self.layout();
        let mut idx = [0usize; FACE_DOFS];
        for k in 0..4 {
            let v = topo.faces[f][k];
            for c in 0..3 {
                idx[3 * k + c] = l.vertex(v) + c;
            }
            let (e, same) = topo.face_edges[f][k];
            for c in 0..3 {
                idx[12 + 3 * k + c] = l.s(e) + c;
            }
            let (start, end) = if same { (0, 1) } else { (1, 0) };
            idx[24 + 2 * k] = l.theta(e, start);
            idx[24 + 2 * k + 1] = l.theta(e, end);
        }
        idx
    }

    /// Local unknowns of face `f`: corners, `s` per slot, angles per slot
    /// (start, end) in the face's traversal direction.
    pub fn face_local(&self, topo: &Topology, f: usize) -> [f64; FACE_DOFS] {
        let mut x = [0.0; FACE_DOFS];
        for k in 0..4 {
            let v = self.vertices[topo.faces[f][k]];
            let (e, same) = topo.face_edges[f][k];
            x[3 * k..3 * k + 3].copy_from_slice(v.as_slice());
            x[12 + 3 * k..15 + 3 * k].copy_from_slice(self.s[e].as_slice());
            let t = self.theta[e];
            let (a, b) = if same { (t[0], t[1]) } else { (t[1], t[0]) };
            x[24 + 2 * k] = a;
            x[25 + 2 * k] = b;
        }
        x
    }

    /// Boundary of face `f` in the face's own corner order.
    pub fn face_boundary(&self, topo: &Topology, f: usize) -> PanelBoundary {
        let corners = topo.faces[f].map(|v| self.vertices[v]);
        let edges = std::array::from_fn(|k| {
            let (e, same) = topo.face_edges[f][k];
            let p = EdgeCurveParams { s: self.s[e], theta: self.theta[e] };
            if same {
                p
            } else {
                p.reversed()
            }
        });
        PanelBoundary { corners, edges }
    }
}
