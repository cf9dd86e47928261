//! JSON documents exchanged with clients. Every top-level response carries
//! the schema version.

use crate::session::{EditResult, RunStatus};
use crate::Result;
use coldbend_core::geometry::schema::BoundaryDoc;
use coldbend_core::P3;
use coldbend_design::{DesignReport, DesignState, IterationReport, ModeCriterion, OptimizeConfig, ReferenceSurface};
use serde::{Deserialize, Serialize};

/// A base mesh as OBJ text or as explicit vertex and polygon lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum MeshSource {
    Obj { text: String },
    Json { vertices: Vec<[f64; 3]>, faces: Vec<Vec<usize>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionOptions {
    /// Break threshold for panels (MPa).
    pub sigma_max: f64,
    /// Display tessellation per panel and direction.
    pub resolution: usize,
    pub criterion: ModeCriterion,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self { sigma_max: 65.0, resolution: crate::DEFAULT_RESOLUTION, criterion: ModeCriterion::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDoc {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

impl ReferenceDoc {
    pub fn surface(&self) -> Result<ReferenceSurface> {
        let v = self.vertices.iter().map(|p| P3::new(p[0], p[1], p[2])).collect();
        Ok(ReferenceSurface::new(v, self.triangles.clone())?)
    }
}

impl From<&ReferenceSurface> for ReferenceDoc {
    fn from(r: &ReferenceSurface) -> Self {
        Self { vertices: r.vertices.iter().map(|p| [p.x, p.y, p.z]).collect(), triangles: r.triangles.clone() }
    }
}

/// Reference surface given as a quad mesh or as triangles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReferenceSource {
    Triangles(ReferenceDoc),
    Mesh(MeshSource),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub mesh: MeshSource,
    #[serde(default)]
    pub reference: Option<ReferenceSource>,
    /// Model file; the server default is used when absent.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub options: SessionOptions,
}

/// Everything needed to restore a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionFile {
    pub schema: u32,
    pub state: DesignState,
    pub reference: Option<ReferenceDoc>,
    pub model: Option<String>,
    pub options: SessionOptions,
    pub revision: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tessellation {
    pub vertices: Vec<[f64; 3]>,
    pub quads: Vec<[usize; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelView {
    pub face: usize,
    /// Selected mixture component.
    pub mode: usize,
    /// Predicted stress of the selected component (MPa).
    pub sigma: f64,
    pub pi: f64,
    /// `[π, σ̂]` of every component.
    pub modes: Vec<[f64; 2]>,
    /// Predicted stress above the session's break threshold.
    pub broken: bool,
    pub in_domain: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tessellation: Option<Tessellation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema: u32,
    pub session: u64,
    pub revision: u64,
    pub checksum: String,
    pub status: RunStatus,
    pub sigma_max: f64,
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 4]>,
    pub violating: usize,
    pub panels: Vec<PanelView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveVertex {
    pub vertex: usize,
    pub position: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetMode {
    pub face: usize,
    pub mode: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditResponse {
    pub schema: u32,
    pub session: u64,
    #[serde(flatten)]
    pub result: EditResult,
}

/// Stateless prediction for explicit boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    #[serde(default)]
    pub model: Option<String>,
    pub boundaries: Vec<BoundaryDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedMode {
    pub component: usize,
    pub pi: f64,
    pub sigma: f64,
    /// Predicted panel with its interior controls.
    pub panel: BoundaryDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPrediction {
    pub in_domain: bool,
    /// Admissible modes, most probable first.
    pub modes: Vec<PredictedMode>,
    /// Index into `modes` of the lower-stress choice.
    pub best: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub schema: u32,
    pub predictions: Vec<BoundaryPrediction>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StartOptimization {
    #[serde(default)]
    pub config: OptimizeConfig,
}

/// One completed iteration as seen by clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Revision of the snapshot published with this iteration.
    pub revision: u64,
    pub checksum: String,
    #[serde(flatten)]
    pub report: IterationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PollResponse {
    pub schema: u32,
    pub session: u64,
    pub status: RunStatus,
    pub revision: u64,
    /// Reports of the current or last run from index `since` on.
    pub reports: Vec<RunReport>,
    /// Total number of reports of that run.
    pub total: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportKind {
    Panels,
    RestShapes,
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportRequest {
    pub what: ExportKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportedPanel {
    pub face: usize,
    pub panel: BoundaryDoc,
    pub tessellation: Tessellation,
    pub sigma: f64,
    /// Outside the surrogate's input domain: only a simulation is reliable.
    pub simulated_only: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestShape {
    pub face: usize,
    /// Flat cutting outline in panel plane coordinates (mm), counterclockwise.
    pub outline: Vec<[f64; 2]>,
    /// The same boundary nodes on the bent panel.
    pub deformed: Vec<[f64; 3]>,
    pub sigma: f64,
    pub sigma_true: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelCheck {
    pub face: usize,
    pub sigma_predicted: f64,
    /// Aggregated stress of the re-simulated panel; absent if the solve failed.
    pub sigma_simulated: Option<f64>,
    pub sigma_true: Option<f64>,
    pub simulated_only: bool,
    pub broken: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "what", rename_all = "kebab-case")]
pub enum Export {
    Panels { panels: Vec<ExportedPanel> },
    RestShapes { panels: Vec<RestShape>, failed: Vec<usize> },
    Report { design: DesignReport, panels: Vec<PanelCheck> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportResponse {
    pub schema: u32,
    pub session: u64,
    pub revision: u64,
    #[serde(flatten)]
    pub export: Export,
}

/// Server-push messages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Predictions { revision: u64, panels: Vec<PanelView> },
    Iteration(RunReport),
    Status { status: RunStatus, revision: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub schema: u32,
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<coldbend_core::geometry::MeshIssue>,
}
