#![allow(dead_code)]

use coldbend_core::geometry::{BezierPatch, PanelBoundary};
use coldbend_core::shell::element::dihedral;
use coldbend_core::shell::{init_panel_mesh, MeshOptions, TriPanelMesh};
use coldbend_core::P3;

pub fn rectangle_patch(w: f64, h: f64) -> BezierPatch {
    let corners = [P3::new(0.0, 0.0, 0.0), P3::new(w, 0.0, 0.0), P3::new(w, h, 0.0), P3::new(0.0, h, 0.0)];
    PanelBoundary::straight(corners).unwrap().zero_twist_patch()
}

/// Planar mesh whose rest and deformed nodes coincide (z = 0), centred at the origin.
pub fn flat_mesh(w: f64, h: f64, boundary_edges: usize) -> TriPanelMesh {
    let mut mesh = init_panel_mesh(&rectangle_patch(w, h), &MeshOptions::with_boundary_edges(boundary_edges)).unwrap();
    for (x, r) in mesh.x.iter_mut().zip(&mesh.rest) {
        *x = P3::new(r.x, r.y, 0.0);
    }
    mesh
}

/// Mid-edge normal deviations taken from an exact surface normal field.
pub fn exact_phi(mesh: &mut TriPanelMesh, normal: impl Fn(&P3) -> P3) {
    let topo = mesh.topo.clone();
    for (e, &[a, b]) in topo.edges.iter().enumerate() {
        let (xa, xb) = (mesh.x[a], mesh.x[b]);
        let ed = (xb - xa).normalize();
        let left = topo.edge_tris[e][0];
        let tri = topo.tris[left];
        let k = tri.iter().position(|&v| v != a && v != b).unwrap();
        let c = tri[k];
        let n_left = (xb - xa).cross(&(mesh.x[c] - xa)).normalize();
        let n = normal(&((xa + xb) / 2.0));
        let n = (n - ed * n.dot(&ed)).normalize();
        let n = if n.dot(&n_left) < 0.0 { -n } else { n };
        let c_left = ed.dot(&n_left.cross(&n)).atan2(n_left.dot(&n));
        let theta = match topo.opposite_vertex(left, k) {
            Some(d) => dihedral(&xa, &xb, &mesh.x[c], &mesh.x[d]).unwrap().0,
            None => 0.0,
        };
        mesh.phi[e] = c_left - 0.5 * theta;
    }
}

/// Wraps a flat mesh onto the cylinder of radius `r` around the y axis.
pub fn wrap_cylinder(mesh: &mut TriPanelMesh, r: f64) {
    for (x, p) in mesh.x.iter_mut().zip(&mesh.rest) {
        let a = p.x / r;
        *x = P3::new(r * a.sin(), p.y, r * a.cos() - r);
    }
    exact_phi(mesh, |m| P3::new(m.x, 0.0, m.z + r).normalize());
}

/// A non-planar boundary with tilted edge planes and curved edges.
pub fn curved_boundary(scale: f64) -> PanelBoundary {
    use coldbend_core::geometry::EdgeCurveParams;
    let corners = [P3::new(0.0, 0.0, 0.0), P3::new(420.0, 10.0, 25.0), P3::new(400.0, 320.0, -10.0), P3::new(-20.0, 300.0, 30.0)]
        .map(|p| p * scale);
    let straight = PanelBoundary::straight(corners).unwrap();
    let gammas = [0.2, -0.1, 0.3, -0.25];
    let thetas = [[0.04, -0.02], [0.03, 0.05], [-0.06, 0.02], [0.01, -0.03]];
    let edges = std::array::from_fn(|k| {
        let e = straight.edge_dir(k);
        let s = straight.edges[k].s;
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(e), gammas[k]);
        EdgeCurveParams { s: rot * s, theta: thetas[k] }
    });
    PanelBoundary::new(corners, edges)
}
