//! Fine triangle mesh the design should stay close to, with closest-point
//! queries through a bounding-volume hierarchy.

use crate::{Error, Result};
use coldbend_core::geometry::QuadBaseMesh;
use coldbend_core::P3;

#[derive(Clone, Debug)]
struct Node {
    lo: P3,
    hi: P3,
    /// Leaf: `tris[start..start + count]`; inner: children at `start`, `start + 1`.
    start: usize,
    count: usize,
}

#[derive(Clone, Debug)]
pub struct ReferenceSurface {
    pub vertices: Vec<P3>,
    pub triangles: Vec<[usize; 3]>,
    pub normals: Vec<P3>,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

/// Closest point on the reference and the interpolated unit normal there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Foot {
    pub point: P3,
    pub normal: P3,
    pub triangle: usize,
    pub distance: f64,
}

const LEAF: usize = 4;

impl ReferenceSurface {
    /// Builds the surface; vertex normals are area-weighted face normals.
    pub fn new(vertices: Vec<P3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Invalid("reference surface has no triangles".into()));
        }
        if triangles.iter().flatten().any(|&i| i >= vertices.len()) {
            return Err(Error::Invalid("reference triangle index out of range".into()));
        }
        let mut normals = vec![P3::zeros(); vertices.len()];
        for t in &triangles {
            let [a, b, c] = t.map(|i| vertices[i]);
            let n = (b - a).cross(&(c - a));
            for &i in t {
                normals[i] += n;
            }
        }
        for (i, n) in normals.iter_mut().enumerate() {
            *n = n.try_normalize(1e-300).ok_or_else(|| Error::Invalid(format!("reference vertex {i} has no area")))?;
        }
        let mut s = Self { vertices, triangles, normals, nodes: Vec::new(), order: Vec::new() };
        s.build();
        Ok(s)
    }

    /// Triangulates every quad along its shorter diagonal.
    pub fn from_quad_mesh(mesh: &QuadBaseMesh) -> Result<Self> {
        let v = &mesh.vertices;
        let mut tris = Vec::with_capacity(2 * mesh.faces.len());
        for &[a, b, c, d] in &mesh.faces {
            if (v[c] - v[a]).norm() <= (v[d] - v[b]).norm() {
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            } else {
                tris.push([a, b, d]);
                tris.push([b, c, d]);
            }
        }
        Self::new(v.clone(), tris)
    }

    fn bounds(&self, tris: &[usize]) -> (P3, P3) {
        let mut lo = P3::repeat(f64::INFINITY);
        let mut hi = P3::repeat(f64::NEG_INFINITY);
        for &t in tris {
            for &i in &self.triangles[t] {
                lo = lo.inf(&self.vertices[i]);
                hi = hi.sup(&self.vertices[i]);
            }
        }
        (lo, hi)
    }

    fn build(&mut self) {
        self.order = (0..self.triangles.len()).collect();
        let centroid: Vec<P3> = self
            .triangles
            .iter()
            .map(|t| (self.vertices[t[0]] + self.vertices[t[1]] + self.vertices[t[2]]) / 3.0)
            .collect();
        let (lo, hi) = self.bounds(&self.order);
        self.nodes = vec![Node { lo, hi, start: 0, count: self.order.len() }];
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let Node { lo, hi, start, count } = self.nodes[ni].clone();
            if count <= LEAF {
                continue;
            }
            let axis = (hi - lo).imax();
            let slice = &mut self.order[start..start + count];
            slice.sort_by(|&a, &b| centroid[a][axis].total_cmp(&centroid[b][axis]));
            let half = count / 2;
            let first = self.nodes.len();
            for (s, c) in [(start, half), (start + half, count - half)] {
                let (l, h) = self.bounds(&self.order[s..s + c]);
                self.nodes.push(Node { lo: l, hi: h, start: s, count: c });
            }
            self.nodes[ni] = Node { lo, hi, start: first, count: 0 };
            stack.push(first);
            stack.push(first + 1);
        }
    }

    fn box_distance_sq(n: &Node, x: &P3) -> f64 {
        (0..3).map(|k| (n.lo[k] - x[k]).max(0.0).max(x[k] - n.hi[k])).map(|d| d * d).sum()
    }

    /// Closest point on the surface to `x`.
    pub fn closest(&self, x: &P3) -> Foot {
        let mut best = (f64::INFINITY, 0usize, [1.0, 0.0, 0.0], P3::zeros());
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni];
            if Self::box_distance_sq(n, x) >= best.0 {
                continue;
            }
            if n.count > 0 {
                for &t in &self.order[n.start..n.start + n.count] {
                    let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
                    let (q, bary) = closest_on_triangle(x, &a, &b, &c);
                    let d = (q - x).norm_squared();
                    if d < best.0 {
                        best = (d, t, bary, q);
                    }
                }
            } else {
                let (l, r) = (n.start, n.start + 1);
                let (dl, dr) = (Self::box_distance_sq(&self.nodes[l], x), Self::box_distance_sq(&self.nodes[r], x));
                // visit the nearer child first
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        let (d, t, w, point) = best;
        let tri = self.triangles[t];
        let n = self.normals[tri[0]] * w[0] + self.normals[tri[1]] * w[1] + self.normals[tri[2]] * w[2];
        let [a, b, c] = tri.map(|i| self.vertices[i]);
        let normal = n.try_normalize(1e-300).unwrap_or_else(|| (b - a).cross(&(c - a)).normalize());
        Foot { point, normal, triangle: t, distance: d.sqrt() }
    }

    pub fn transformed(&self, r: &nalgebra::Matrix3<f64>, t: &P3) -> Result<Self> {
        Self::new(self.vertices.iter().map(|v| r * v + t).collect(), self.triangles.clone())
    }
}

/// Closest point on triangle `abc` to `p` and its barycentric weights
/// (region tests on the Voronoi regions of vertices, edges and the face).
pub fn closest_on_triangle(p: &P3, a: &P3, b: &P3, c: &P3) -> (P3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}
