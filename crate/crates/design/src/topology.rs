//! Connectivity the residual terms are defined on.

use coldbend_core::geometry::quad_mesh::Side;
use coldbend_core::geometry::{Polyline, QuadBaseMesh};

/// Two consecutive polyline edges meeting at `vertex`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Joint {
    pub vertex: usize,
    pub edges: [usize; 2],
}

/// A polyline edge `(b, c)` with its polyline neighbours `a` and `d`, so the
/// osculating planes at `b` and `c` are defined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InnerEdge {
    pub edge: usize,
    pub vertices: [usize; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub faces: Vec<[usize; 4]>,
    pub edges: Vec<[usize; 2]>,
    pub face_edges: Vec<[(usize, bool); 4]>,
    pub edge_sides: Vec<Vec<Side>>,
    pub vertex_edges: Vec<Vec<usize>>,
    pub polylines: Vec<Polyline>,
    /// Edges shared by two faces, with both sides.
    pub interior_edges: Vec<(usize, Side, Side)>,
    pub joints: Vec<Joint>,
    /// Consecutive vertex triples along polylines.
    pub triples: Vec<[usize; 3]>,
    pub inner_edges: Vec<InnerEdge>,
    /// Interior vertices of valence other than four.
    pub singular: Vec<usize>,
}

impl Topology {
    pub fn new(mesh: &QuadBaseMesh) -> Self {
        let polylines = mesh.polylines();
        let vertex_edges = mesh.vertex_edges();
        let boundary = mesh.boundary_vertices();
        let interior_edges = (0..mesh.edges.len())
            .filter(|&e| mesh.edge_sides[e].len() == 2)
            .map(|e| (e, mesh.edge_sides[e][0], mesh.edge_sides[e][1]))
            .collect();
        let (mut joints, mut triples, mut inner_edges) = (Vec::new(), Vec::new(), Vec::new());
        for pl in &polylines {
            let n = pl.vertices.len();
            let m = pl.edges.len();
            // vertex i sits between edges i-1 and i
            let vertex_at = |i: isize| -> Option<usize> {
                if pl.closed {
                    Some(pl.vertices[i.rem_euclid(n as isize) as usize])
                } else if i >= 0 && (i as usize) < n {
                    Some(pl.vertices[i as usize])
                } else {
                    None
                }
            };
            let joint_range = if pl.closed { 0..n } else { 1..n.saturating_sub(1) };
            for i in joint_range {
                let prev = pl.edges[(i + m - 1) % m];
                let next = pl.edges[i % m];
                joints.push(Joint { vertex: pl.vertices[i], edges: [prev, next] });
                let a = vertex_at(i as isize - 1).unwrap();
                let c = vertex_at(i as isize + 1).unwrap();
                triples.push([a, pl.vertices[i], c]);
            }
            for (j, &e) in pl.edges.iter().enumerate() {
                let ji = j as isize;
                if let (Some(a), Some(b), Some(c), Some(d)) =
                    (vertex_at(ji - 1), vertex_at(ji), vertex_at(ji + 1), vertex_at(ji + 2))
                {
                    inner_edges.push(InnerEdge { edge: e, vertices: [a, b, c, d] });
                }
            }
        }
        let singular =
            (0..mesh.vertices.len()).filter(|&v| !boundary[v] && vertex_edges[v].len() != 4).collect();
        Self {
            faces: mesh.faces.clone(),
            edges: mesh.edges.clone(),
            face_edges: mesh.face_edges.clone(),
            edge_sides: mesh.edge_sides.clone(),
            vertex_edges,
            polylines,
            interior_edges,
            joints,
            triples,
            inner_edges,
            singular,
        }
    }

    /// Which stored end (0 or 1) of edge `e` is vertex `v`.
    pub fn end_of(&self, e: usize, v: usize) -> usize {
        if self.edges[e][0] == v {
            0
        } else {
            debug_assert_eq!(self.edges[e][1], v);
            1
        }
    }

    pub fn other(&self, e: usize, v: usize) -> usize {
        let [a, b] = self.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_sides[e].len() == 1
    }
}
