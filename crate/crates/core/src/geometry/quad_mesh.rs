//! Quad base mesh with edge/face adjacency, polyline tracing, Catmull-Clark
//! subdivision and OBJ exchange.

use crate::P3;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshIssue {
    Empty,
    NotQuad { face: usize, vertices: usize },
    VertexOutOfRange { face: usize, vertex: usize },
    RepeatedVertex { face: usize },
    NonManifoldEdge { a: usize, b: usize },
    InconsistentOrientation { a: usize, b: usize },
    NonFiniteVertex { vertex: usize },
}

impl fmt::Display for MeshIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "mesh has no faces"),
            Self::NotQuad { face, vertices } => write!(f, "face {face} has {vertices} vertices, expected 4"),
            Self::VertexOutOfRange { face, vertex } => write!(f, "face {face} references missing vertex {vertex}"),
            Self::RepeatedVertex { face } => write!(f, "face {face} repeats a vertex"),
            Self::NonManifoldEdge { a, b } => write!(f, "edge ({a}, {b}) is shared by more than two faces"),
            Self::InconsistentOrientation { a, b } => {
                write!(f, "faces around edge ({a}, {b}) have inconsistent orientation")
            }
            Self::NonFiniteVertex { vertex } => write!(f, "vertex {vertex} is not finite"),
        }
    }
}

fn issues_error(issues: &[MeshIssue]) -> crate::Error {
    let msg: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
    crate::Error::Invalid(format!("invalid quad mesh: {}", msg.join("; ")))
}

/// One face-side of an edge: the face and the local edge slot `k`
/// (from face vertex `k` to `k+1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Side {
    pub face: usize,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadBaseMesh {
    pub vertices: Vec<P3>,
    pub faces: Vec<[usize; 4]>,
    /// Each edge stored in the direction of its first face-side.
    pub edges: Vec<[usize; 2]>,
    /// Per face and slot: `(edge, same direction as the stored edge)`.
    pub face_edges: Vec<[(usize, bool); 4]>,
    pub edge_sides: Vec<Vec<Side>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub closed: bool,
}

/// Checks raw polygon lists before building adjacency.
pub fn check_polygons(nv: usize, polys: &[Vec<usize>]) -> Vec<MeshIssue> {
    let mut issues = Vec::new();
    if polys.is_empty() {
        issues.push(MeshIssue::Empty);
    }
    for (f, p) in polys.iter().enumerate() {
        if p.len() != 4 {
            issues.push(MeshIssue::NotQuad { face: f, vertices: p.len() });
            continue;
        }
        if let Some(&v) = p.iter().find(|&&v| v >= nv) {
            issues.push(MeshIssue::VertexOutOfRange { face: f, vertex: v });
            continue;
        }
        let mut s = p.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != 4 {
            issues.push(MeshIssue::RepeatedVertex { face: f });
        }
    }
    issues
}

impl QuadBaseMesh {
    pub fn from_polygons(vertices: Vec<P3>, polys: &[Vec<usize>]) -> crate::Result<Self> {
        Self::checked(vertices, polys).map_err(|issues| issues_error(&issues))
    }

    /// Like [`QuadBaseMesh::from_polygons`], but reports every problem found
    /// as a structured list.
    pub fn checked(vertices: Vec<P3>, polys: &[Vec<usize>]) -> Result<Self, Vec<MeshIssue>> {
        let issues = check_polygons(vertices.len(), polys);
        if !issues.is_empty() {
            return Err(issues);
        }
        Self::build(vertices, polys.iter().map(|p| [p[0], p[1], p[2], p[3]]).collect())
    }

    pub fn new(vertices: Vec<P3>, faces: Vec<[usize; 4]>) -> crate::Result<Self> {
        Self::build(vertices, faces).map_err(|issues| issues_error(&issues))
    }

    fn build(vertices: Vec<P3>, faces: Vec<[usize; 4]>) -> Result<Self, Vec<MeshIssue>> {
        let polys: Vec<Vec<usize>> = faces.iter().map(|f| f.to_vec()).collect();
        let mut issues = check_polygons(vertices.len(), &polys);
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                issues.push(MeshIssue::NonFiniteVertex { vertex: i });
            }
        }
        if !issues.is_empty() {
            return Err(issues);
        }
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_sides: Vec<Vec<Side>> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut face_edges = Vec::with_capacity(faces.len());
        for (f, face) in faces.iter().enumerate() {
            let mut fe = [(0usize, true); 4];
            for k in 0..4 {
                let (a, b) = (face[k], face[(k + 1) % 4]);
                let key = (a.min(b), a.max(b));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push([a, b]);
                    edge_sides.push(Vec::new());
                    edges.len() - 1
                });
                edge_sides[e].push(Side { face: f, k });
                fe[k] = (e, edges[e] == [a, b]);
            }
            face_edges.push(fe);
        }
        for (e, sides) in edge_sides.iter().enumerate() {
            let [a, b] = edges[e];
            if sides.len() > 2 {
                issues.push(MeshIssue::NonManifoldEdge { a, b });
            } else if sides.len() == 2 {
                let d0 = face_edges[sides[0].face][sides[0].k].1;
                let d1 = face_edges[sides[1].face][sides[1].k].1;
                if d0 == d1 {
                    issues.push(MeshIssue::InconsistentOrientation { a, b });
                }
            }
        }
        if !issues.is_empty() {
            return Err(issues);
        }
        Ok(Self { vertices, faces, edges, face_edges, edge_sides })
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_sides[e].len() == 1
    }

    pub fn vertex_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            out[a].push(e);
            out[b].push(e);
        }
        out
    }

    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (f, face) in self.faces.iter().enumerate() {
            for &v in face {
                out[v].push(f);
            }
        }
        out
    }

    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut out = vec![false; self.vertices.len()];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            if self.is_boundary_edge(e) {
                out[a] = true;
                out[b] = true;
            }
        }
        out
    }

    /// A vertex is regular if interior with valence 4 or boundary with valence 3.
    pub fn regular_vertices(&self) -> Vec<bool> {
        let ve = self.vertex_edges();
        let bd = self.boundary_vertices();
        (0..self.vertices.len())
            .map(|v| if bd[v] { ve[v].len() == 3 } else { ve[v].len() == 4 })
            .collect()
    }

    pub fn other_vertex(&self, e: usize, v: usize) -> usize {
        let [a, b] = self.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    /// The edge continuing `e` straight through vertex `v`, if `v` is regular.
    pub fn continuation(&self, e: usize, v: usize, vertex_edges: &[Vec<usize>], regular: &[bool]) -> Option<usize> {
        if !regular[v] {
            return None;
        }
        let faces_of = |x: usize| self.edge_sides[x].iter().map(|s| s.face).collect::<Vec<_>>();
        let fe = faces_of(e);
        let cands: Vec<usize> = vertex_edges[v]
            .iter()
            .copied()
            .filter(|&x| x != e && faces_of(x).iter().all(|f| !fe.contains(f)))
            .collect();
        if cands.len() == 1 {
            Some(cands[0])
        } else {
            None
        }
    }

    /// Maximal chains of edges continuing through regular vertices.
    pub fn polylines(&self) -> Vec<Polyline> {
        let ve = self.vertex_edges();
        let reg = self.regular_vertices();
        let mut used = vec![false; self.edges.len()];
        let mut out = Vec::new();
        for e0 in 0..self.edges.len() {
            if used[e0] {
                continue;
            }
            used[e0] = true;
            let [a, b] = self.edges[e0];
            let mut forward_v = vec![b];
            let mut forward_e = vec![];
            let mut closed = false;
            let (mut cur_e, mut cur_v) = (e0, b);
            while let Some(n) = self.continuation(cur_e, cur_v, &ve, &reg) {
                if n == e0 {
                    closed = true;
                    break;
                }
                if used[n] {
                    break;
                }
                used[n] = true;
                forward_e.push(n);
                cur_v = self.other_vertex(n, cur_v);
                forward_v.push(cur_v);
                cur_e = n;
            }
            let mut back_v = vec![];
            let mut back_e = vec![];
            if !closed {
                let (mut ce, mut cv) = (e0, a);
                while let Some(n) = self.continuation(ce, cv, &ve, &reg) {
                    if used[n] {
                        break;
                    }
                    used[n] = true;
                    back_e.push(n);
                    cv = self.other_vertex(n, cv);
                    back_v.push(cv);
                    ce = n;
                }
            }
            back_v.reverse();
            back_e.reverse();
            let mut vertices = back_v;
            vertices.push(a);
            vertices.extend(forward_v);
            let mut edges = back_e;
            edges.push(e0);
            edges.extend(forward_e);
            if closed {
                // last vertex repeats the first
                vertices.pop();
            }
            out.push(Polyline { vertices, edges, closed });
        }
        out
    }

    /// Unit normal of face `f` from its diagonals.
    pub fn face_normal(&self, f: usize) -> P3 {
        let [a, b, c, d] = self.faces[f].map(|i| self.vertices[i]);
        (c - a).cross(&(d - b)).normalize()
    }

    /// Area-weighted average of incident face normals.
    pub fn vertex_normals(&self) -> Vec<P3> {
        let mut n = vec![P3::zeros(); self.vertices.len()];
        for face in &self.faces {
            let [a, b, c, d] = face.map(|i| self.vertices[i]);
            let w = (c - a).cross(&(d - b)) * 0.5;
            for &v in face {
                n[v] += w;
            }
        }
        n.into_iter().map(|v| v.try_normalize(1e-300).unwrap_or(P3::z())).collect()
    }

    /// One level of Catmull-Clark. Boundary edges use midpoints, boundary
    /// vertices the (1, 6, 1)/8 rule, and corner vertices (one face) stay put.
    pub fn catmull_clark(&self) -> crate::Result<Self> {
        let nv = self.vertices.len();
        let ne = self.edges.len();
        let face_pts: Vec<P3> = self.faces.iter().map(|f| f.iter().map(|&i| self.vertices[i]).sum::<P3>() / 4.0).collect();
        let edge_pts: Vec<P3> = (0..ne)
            .map(|e| {
                let [a, b] = self.edges[e];
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                if self.is_boundary_edge(e) {
                    (pa + pb) / 2.0
                } else {
                    let fs: P3 = self.edge_sides[e].iter().map(|s| face_pts[s.face]).sum();
                    (pa + pb + fs) / 4.0
                }
            })
            .collect();
        let ve = self.vertex_edges();
        let vf = self.vertex_faces();
        let bd = self.boundary_vertices();
        let vert_pts: Vec<P3> = (0..nv)
            .map(|v| {
                let s = self.vertices[v];
                if ve[v].is_empty() {
                    return s;
                }
                if bd[v] {
                    if vf[v].len() <= 1 {
                        return s;
                    }
                    let nb: Vec<P3> = ve[v]
                        .iter()
                        .filter(|&&e| self.is_boundary_edge(e))
                        .map(|&e| self.vertices[self.other_vertex(e, v)])
                        .collect();
                    if nb.len() != 2 {
                        return s;
                    }
                    return (nb[0] + s * 6.0 + nb[1]) / 8.0;
                }
                let n = ve[v].len() as f64;
                let q: P3 = vf[v].iter().map(|&f| face_pts[f]).sum::<P3>() / vf[v].len() as f64;
                let r: P3 = ve[v]
                    .iter()
                    .map(|&e| (self.vertices[self.edges[e][0]] + self.vertices[self.edges[e][1]]) / 2.0)
                    .sum::<P3>()
                    / n;
                (q + r * 2.0 + s * (n - 3.0)) / n
            })
            .collect();
        let mut vertices = vert_pts;
        vertices.extend(edge_pts);
        vertices.extend(face_pts);
        let mut faces = Vec::with_capacity(self.faces.len() * 4);
        for (f, face) in self.faces.iter().enumerate() {
            let fp = nv + ne + f;
            for k in 0..4 {
                let e_out = nv + self.face_edges[f][k].0;
                let e_in = nv + self.face_edges[f][(k + 3) % 4].0;
                faces.push([face[k], e_out, fp, e_in]);
            }
        }
        Self::new(vertices, faces)
    }

    pub fn parse_obj(text: &str) -> crate::Result<Self> {
        let (vertices, polys) = parse_obj_polygons(text)?;
        Self::from_polygons(vertices, &polys)
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
        }
        for f in &self.faces {
            s.push_str(&format!("f {} {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1));
        }
        s
    }

    /// Regular `nx × ny` grid of faces spanned by `f(i, j)` for vertex lattice
    /// coordinates `0 ≤ i ≤ nx`, `0 ≤ j ≤ ny`.
    pub fn grid(nx: usize, ny: usize, f: impl Fn(usize, usize) -> P3) -> crate::Result<Self> {
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(f(i, j));
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut faces = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Self::new(vertices, faces)
    }
}

/// Versioned JSON form of a base mesh.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshDoc {
    pub version: u32,
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<Vec<usize>>,
}

pub const MESH_SCHEMA_VERSION: u32 = 1;

impl From<&QuadBaseMesh> for MeshDoc {
    fn from(m: &QuadBaseMesh) -> Self {
        Self {
            version: MESH_SCHEMA_VERSION,
            vertices: m.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            faces: m.faces.iter().map(|f| f.to_vec()).collect(),
        }
    }
}

impl MeshDoc {
    pub fn into_mesh(self) -> crate::Result<QuadBaseMesh> {
        if self.version != MESH_SCHEMA_VERSION {
            return Err(crate::Error::format(format!("unsupported mesh schema version {}", self.version)));
        }
        QuadBaseMesh::from_polygons(self.vertices.iter().map(|v| P3::new(v[0], v[1], v[2])).collect(), &self.faces)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_polylines_are_rows_and_columns() {
        let m = QuadBaseMesh::grid(3, 2, |i, j| P3::new(i as f64, j as f64, 0.0)).unwrap();
        let pl = m.polylines();
        assert_eq!(pl.len(), 3 + 4);
        assert!(pl.iter().all(|p| !p.closed));
        let lens: Vec<usize> = pl.iter().map(|p| p.edges.len()).collect();
        assert_eq!(lens.iter().filter(|&&l| l == 3).count(), 3);
        assert_eq!(lens.iter().filter(|&&l| l == 2).count(), 4);
        assert_eq!(lens.iter().sum::<usize>(), m.edges.len());
    }

    #[test]
    fn orientation_conflicts_are_reported() {
        let v = (0..6).map(|i| P3::new((i % 3) as f64, (i / 3) as f64, 0.0)).collect();
        let err = QuadBaseMesh::new(v, vec![[0, 1, 4, 3], [1, 4, 5, 2]]).unwrap_err();
        assert!(err.to_string().contains("inconsistent orientation"));
    }

    #[test]
    fn obj_roundtrip_and_triangle_rejection() {
        let m = QuadBaseMesh::grid(2, 2, |i, j| P3::new(i as f64, j as f64, (i * j) as f64)).unwrap();
        let back = QuadBaseMesh::parse_obj(&m.to_obj()).unwrap();
        assert_eq!(back.faces, m.faces);
        assert_eq!(back.vertices, m.vertices);
        let bad = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 4 3\nf 1 2 3\n";
        let err = QuadBaseMesh::parse_obj(bad).unwrap_err().to_string();
        assert!(err.contains("face 1 has 3 vertices"), "{err}");
    }
}


/// Vertices and raw polygons of an OBJ document, before any mesh checks.
pub fn parse_obj_polygons(text: &str) -> crate::Result<(Vec<P3>, Vec<Vec<usize>>)> {
    let mut vertices = Vec::new();
    let mut polys: Vec<Vec<usize>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| crate::Error::format(format!("line {}: {e}", ln + 1)))?;
                if c.len() != 3 {
                    return Err(crate::Error::format(format!("line {}: vertex needs 3 coordinates", ln + 1)));
                }
                vertices.push(P3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in it {
                    let idx = tok.split('/').next().unwrap_or("");
                    let i: i64 = idx
                        .parse()
                        .map_err(|e| crate::Error::format(format!("line {}: bad face index {tok:?}: {e}", ln + 1)))?;
                    let resolved = if i > 0 { i - 1 } else { vertices.len() as i64 + i };
                    if resolved < 0 {
                        return Err(crate::Error::format(format!("line {}: face index {i} out of range", ln + 1)));
                    }
                    poly.push(resolved as usize);
                }
                polys.push(poly);
            }
            _ => {}
        }
    }
    Ok((vertices, polys))
}
