use coldbend_core::geometry::{BezierPatch, PanelBoundary};
use coldbend_core::shell::meshing::Flattening;
use coldbend_core::shell::{init_panel_mesh, MeshOptions};
use coldbend_core::P3;

fn planar_patch() -> BezierPatch {
    let corners = [P3::new(0.0, 0.0, 0.0), P3::new(400.0, 20.0, 0.0), P3::new(380.0, 330.0, 0.0), P3::new(-30.0, 300.0, 0.0)];
    PanelBoundary::straight(corners).unwrap().zero_twist_patch()
}

/// Extrusion of a planar cubic along z: exactly developable.
fn extruded_patch() -> BezierPatch {
    let curve = [P3::new(0.0, 0.0, 0.0), P3::new(120.0, 60.0, 0.0), P3::new(260.0, 70.0, 0.0), P3::new(380.0, 10.0, 0.0)];
    BezierPatch::new(std::array::from_fn(|i| std::array::from_fn(|j| curve[i] + P3::new(0.0, 0.0, 100.0 * j as f64))))
}

#[test]
fn planar_patch_mesh_is_congruent() {
    let mesh = init_panel_mesh(&planar_patch(), &MeshOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    for &[a, b] in &mesh.topo.edges {
        let l3 = (mesh.x[a] - mesh.x[b]).norm();
        let l2 = (mesh.rest[a] - mesh.rest[b]).norm();
        worst = worst.max((l3 - l2).abs() / l2);
    }
    assert!(worst < 1e-9, "edge length mismatch {worst}");
}

#[test]
fn default_resolution_gives_about_a_thousand_triangles() {
    let mesh = init_panel_mesh(&planar_patch(), &MeshOptions::default()).unwrap();
    let n = mesh.topo.tris.len();
    assert!((500..=2000).contains(&n), "{n} triangles");
    assert_eq!(mesh.dof_count(), 3 * mesh.x.len() + mesh.topo.edges.len());
}

#[test]
fn boundary_nodes_lie_on_the_patch_boundary() {
    let p = extruded_patch();
    let mesh = init_panel_mesh(&p, &MeshOptions::with_boundary_edges(60)).unwrap();
    for &v in &mesh.topo.boundary_loop {
        let [u, w] = mesh.uv[v];
        assert!(u == 0.0 || u == 1.0 || w == 0.0 || w == 1.0);
        assert!((p.position(u, w) - mesh.x[v]).norm() < 1e-9);
    }
}

#[test]
fn developable_patch_flattens_isometrically() {
    let fl = Flattening::new(&extruded_patch(), 24).unwrap();
    let mut worst: f64 = 0.0;
    for t in &fl.tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let l3 = (fl.pos[a] - fl.pos[b]).norm();
            let l2 = (fl.flat[a] - fl.flat[b]).norm();
            worst = worst.max((l3 - l2).abs() / l3);
        }
    }
    assert!(worst < 1e-6, "relative length error {worst}");
}
