//! Session exports: predicted panels, flat cutting outlines from re-simulated
//! panels, and a report comparing predicted and simulated stress.

use crate::protocol::{Export, ExportKind, ExportedPanel, PanelCheck, RestShape, Tessellation};
use crate::session::Session;
use crate::Result;
use coldbend_core::geometry::schema::BoundaryDoc;
use coldbend_core::geometry::{EdgeCurveParams, PanelBoundary};
use coldbend_core::panel::{simulate_panel, InitMode, PanelConfig, SimulatedPanel};
use coldbend_core::shell::MeshOptions;
use coldbend_core::P3;
use std::collections::{HashMap, HashSet};

/// Simulation settings used for exports: the resolution of the training data.
pub fn export_panel_config() -> PanelConfig {
    PanelConfig { mesh: MeshOptions::with_boundary_edges(48), ..PanelConfig::default() }
}

/// Face boundary with each edge-plane vector projected to a unit vector
/// orthogonal to its edge, as the simulator requires.
pub fn simulation_boundary(session: &Session, f: usize) -> PanelBoundary {
    let b = session.state().face_boundary(session.topology(), f);
    let edges = std::array::from_fn(|k| {
        let d = b.edge_dir(k);
        let s = b.edges[k].s - d * b.edges[k].s.dot(&d);
        EdgeCurveParams { s: s.try_normalize(1e-12).unwrap_or_else(|| d.cross(&P3::z()).normalize()), theta: b.edges[k].theta }
    });
    PanelBoundary { corners: b.corners, edges }
}

/// Simulates every panel from its predicted shape.
pub fn resimulate(session: &Session, cfg: &PanelConfig) -> Vec<Option<SimulatedPanel>> {
    (0..session.state().faces.len())
        .map(|f| {
            let b = simulation_boundary(session, f);
            let init = InitMode::Patch(session.panel_patch(f));
            simulate_panel(&b, &init, cfg).map_err(|e| log::warn!("face {f}: simulation failed: {e}")).ok()
        })
        .collect()
}

/// Boundary nodes of a triangle mesh as one closed loop.
fn boundary_loop(tris: &[[usize; 3]]) -> Vec<usize> {
    let mut directed = HashSet::new();
    for t in tris {
        for k in 0..3 {
            directed.insert((t[k], t[(k + 1) % 3]));
        }
    }
    let next: HashMap<usize, usize> =
        directed.iter().filter(|(a, b)| !directed.contains(&(*b, *a))).copied().collect();
    let Some(&start) = next.keys().min() else { return Vec::new() };
    let mut out = vec![start];
    let mut v = next[&start];
    while v != start && out.len() <= next.len() {
        out.push(v);
        v = next[&v];
    }
    out
}

fn rest_shape(face: usize, sim: &SimulatedPanel) -> RestShape {
    let mesh = &sim.equilibrium.mesh;
    let mut idx = boundary_loop(&mesh.topo.tris);
    let area: f64 = (0..idx.len())
        .map(|i| {
            let (a, b) = (mesh.rest[idx[i]], mesh.rest[idx[(i + 1) % idx.len()]]);
            a.x * b.y - a.y * b.x
        })
        .sum();
    if area < 0.0 {
        idx.reverse();
    }
    RestShape {
        face,
        outline: idx.iter().map(|&i| [mesh.rest[i].x, mesh.rest[i].y]).collect(),
        deformed: idx.iter().map(|&i| [mesh.x[i].x, mesh.x[i].y, mesh.x[i].z]).collect(),
        sigma: sim.record.sigma,
        sigma_true: sim.record.sigma_true,
    }
}

pub fn export(session: &Session, what: ExportKind, cfg: &PanelConfig) -> Result<Export> {
    let nf = session.state().faces.len();
    Ok(match what {
        ExportKind::Panels => Export::Panels {
            panels: (0..nf)
                .map(|f| {
                    let view = session.panel(f, false);
                    let patch = session.panel_patch(f);
                    let b = session.state().face_boundary(session.topology(), f);
                    let (v, quads) = patch.tessellate(session.options().resolution);
                    ExportedPanel {
                        face: f,
                        panel: BoundaryDoc::new(&b, Some(&patch.interior())),
                        tessellation: Tessellation { vertices: v.iter().map(|p| [p.x, p.y, p.z]).collect(), quads },
                        sigma: view.sigma,
                        simulated_only: !view.in_domain,
                    }
                })
                .collect(),
        },
        ExportKind::RestShapes => {
            let sims = resimulate(session, cfg);
            let failed = (0..nf).filter(|&f| sims[f].is_none()).collect();
            let panels = sims.iter().enumerate().filter_map(|(f, s)| s.as_ref().map(|s| rest_shape(f, s))).collect();
            Export::RestShapes { panels, failed }
        }
        ExportKind::Report => {
            let sims = resimulate(session, cfg);
            let design = session.report()?;
            let panels = (0..nf)
                .map(|f| {
                    let view = session.panel(f, false);
                    let sim = sims[f].as_ref();
                    PanelCheck {
                        face: f,
                        sigma_predicted: view.sigma,
                        sigma_simulated: sim.map(|s| s.record.sigma),
                        sigma_true: sim.map(|s| s.record.sigma_true),
                        simulated_only: !view.in_domain,
                        broken: view.broken,
                    }
                })
                .collect();
            Export::Report { design, panels }
        }
    })
}
