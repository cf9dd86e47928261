//! One design session: the design state, its predictions and the edits the
//! service applies to it.
//!
//! Predictions are cached per face, keyed by the face's 32 local unknowns, so
//! a refresh re-predicts exactly the faces whose inputs changed and always
//! agrees with a full re-prediction.

use crate::protocol::{MeshSource, PanelView, ReferenceDoc, SessionFile, SessionOptions, Snapshot, Tessellation};
use crate::{Error, Result, SCHEMA_VERSION};
use coldbend_core::geometry::compact::compact_encode;
use coldbend_core::geometry::{parse_obj_polygons, PanelBoundary, QuadBaseMesh};
use coldbend_core::P3;
use coldbend_design::face::{face_values, FaceValues, NX};
use coldbend_design::init::{initial_planes, tangent_plane_angle};
use coldbend_design::{initialize_design, DesignReport, DesignState, OptimizeConfig, Problem, ReferenceSurface, Surrogate, Topology, THETA_BOUND};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::sync::Arc;

pub type Model = Arc<dyn Surrogate + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Idle,
    Optimizing,
    Error { message: String },
}

#[derive(Clone)]
struct CachedFace {
    x: [f64; NX],
    values: FaceValues,
}

#[derive(Clone)]
pub struct Session {
    pub id: u64,
    state: DesignState,
    topo: Topology,
    reference: Option<Arc<ReferenceSurface>>,
    model: Model,
    model_path: Option<String>,
    options: SessionOptions,
    revision: u64,
    status: RunStatus,
    cache: Vec<CachedFace>,
}

/// Result of an edit that touches part of the mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditResult {
    pub revision: u64,
    pub changed: bool,
    /// Faces whose surrogate inputs changed and were predicted again.
    pub repredicted: Vec<usize>,
    pub panels: Vec<PanelView>,
}

/// SHA-256 of the canonical JSON form of a design state.
pub fn state_checksum(state: &DesignState) -> String {
    let json = serde_json::to_vec(state).expect("design state serializes");
    hex::encode(Sha256::digest(json))
}

/// Builds a base mesh, reporting every structural problem.
pub fn load_mesh(source: &MeshSource) -> Result<QuadBaseMesh> {
    let (vertices, polys) = match source {
        MeshSource::Obj { text } => parse_obj_polygons(text)?,
        MeshSource::Json { vertices, faces } => (vertices.iter().map(|v| P3::new(v[0], v[1], v[2])).collect(), faces.clone()),
    };
    QuadBaseMesh::checked(vertices, &polys).map_err(Error::Mesh)
}

impl Session {
    /// Initializes the design on `mesh` and predicts every panel.
    pub fn create(
        id: u64,
        mesh: &QuadBaseMesh,
        model: Model,
        model_path: Option<String>,
        reference: Option<ReferenceSurface>,
        options: SessionOptions,
    ) -> Result<Self> {
        let reference = reference.map(Arc::new);
        let config = OptimizeConfig { criterion: options.criterion, ..Default::default() };
        let state = initialize_design(mesh, &*model, reference.as_deref(), &config)?;
        Self::with_state(id, state, model, model_path, reference, options, 0)
    }

    fn with_state(
        id: u64,
        state: DesignState,
        model: Model,
        model_path: Option<String>,
        reference: Option<Arc<ReferenceSurface>>,
        options: SessionOptions,
        revision: u64,
    ) -> Result<Self> {
        let topo = state.topology()?;
        let mut s = Self { id, state, topo, reference, model, model_path, options, revision, status: RunStatus::Idle, cache: Vec::new() };
        s.refresh()?;
        Ok(s)
    }

    pub fn from_file(id: u64, file: SessionFile, model: Model) -> Result<Self> {
        if file.schema != SCHEMA_VERSION {
            return Err(Error::Invalid(format!("unsupported session schema {}", file.schema)));
        }
        let n = file.state.vertices.len();
        if file.state.faces.iter().flatten().any(|&v| v >= n) || file.state.modes.len() != file.state.faces.len() {
            return Err(Error::Invalid("session state is inconsistent".into()));
        }
        let reference = file.reference.map(|r| r.surface()).transpose()?.map(Arc::new);
        Self::with_state(id, file.state, model, file.model, reference, file.options, file.revision)
    }

    pub fn to_file(&self) -> SessionFile {
        SessionFile {
            schema: SCHEMA_VERSION,
            state: self.state.clone(),
            reference: self.reference.as_deref().map(ReferenceDoc::from),
            model: self.model_path.clone(),
            options: self.options.clone(),
            revision: self.revision,
        }
    }

    pub fn state(&self) -> &DesignState {
        &self.state
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn model(&self) -> Model {
        self.model.clone()
    }

    pub fn reference(&self) -> Option<Arc<ReferenceSurface>> {
        self.reference.clone()
    }

    pub fn options(&self) -> &SessionOptions {
        &self.options
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn status(&self) -> &RunStatus {
        &self.status
    }

    pub fn set_status(&mut self, status: RunStatus) {
        self.status = status;
    }

    pub fn checksum(&self) -> String {
        state_checksum(&self.state)
    }

    /// Cached predictions, one per face.
    pub fn predictions(&self) -> Vec<FaceValues> {
        self.cache.iter().map(|c| c.values.clone()).collect()
    }

    /// Predictions of every face computed from scratch.
    pub fn predict_all(&self) -> Result<Vec<FaceValues>> {
        let xs: Vec<[f64; NX]> = (0..self.topo.faces.len()).map(|f| self.state.face_local(&self.topo, f)).collect();
        Ok(face_values(&*self.model, &xs)?)
    }

    /// Re-predicts the faces whose inputs differ from the cache.
    fn refresh(&mut self) -> Result<Vec<usize>> {
        let nf = self.topo.faces.len();
        let xs: Vec<[f64; NX]> = (0..nf).map(|f| self.state.face_local(&self.topo, f)).collect();
        let stale: Vec<usize> = if self.cache.len() != nf {
            (0..nf).collect()
        } else {
            (0..nf).filter(|&f| self.cache[f].x.iter().zip(&xs[f]).any(|(a, b)| a.to_bits() != b.to_bits())).collect()
        };
        if stale.is_empty() {
            return Ok(stale);
        }
        let sub: Vec<[f64; NX]> = stale.iter().map(|&f| xs[f]).collect();
        let values = face_values(&*self.model, &sub)?;
        if self.cache.len() != nf {
            self.cache = xs.iter().zip(values).map(|(x, values)| CachedFace { x: *x, values }).collect();
        } else {
            for (&f, values) in stale.iter().zip(values) {
                self.cache[f] = CachedFace { x: xs[f], values };
            }
        }
        Ok(stale)
    }

    fn problem(&self, config: OptimizeConfig) -> Result<Problem<'_>> {
        Ok(Problem::new(&self.state, &*self.model, self.reference.as_deref(), config)?)
    }

    /// Quality report of the current state.
    pub fn report(&self) -> Result<DesignReport> {
        let mut config = OptimizeConfig { criterion: self.options.criterion, ..Default::default() };
        config.weights.sigma_max = self.options.sigma_max;
        Ok(self.problem(config)?.evaluate(&self.state)?)
    }

    pub fn panel(&self, f: usize, tessellate: bool) -> PanelView {
        let c = &self.cache[f];
        let mode = self.state.modes[f];
        let m = &c.values.prediction.modes[mode];
        PanelView {
            face: f,
            mode,
            sigma: m.sigma,
            pi: c.values.prediction.pi()[mode],
            modes: c.values.prediction.modes.iter().map(|m| [m.pi, m.sigma]).collect(),
            broken: m.sigma > self.options.sigma_max,
            in_domain: self.model.in_domain(&c.values.p),
            tessellation: tessellate.then(|| {
                let (v, quads) = c.values.patch(&c.x, mode).tessellate(self.options.resolution);
                Tessellation { vertices: v.iter().map(|p| [p.x, p.y, p.z]).collect(), quads }
            }),
        }
    }

    /// Predicted panel surface of face `f` in its selected mode.
    pub fn panel_patch(&self, f: usize) -> coldbend_core::geometry::BezierPatch {
        let c = &self.cache[f];
        c.values.patch(&c.x, self.state.modes[f])
    }

    pub fn snapshot(&self, tessellate: bool) -> Snapshot {
        let panels: Vec<PanelView> = (0..self.cache.len()).map(|f| self.panel(f, tessellate)).collect();
        Snapshot {
            schema: SCHEMA_VERSION,
            session: self.id,
            revision: self.revision,
            checksum: self.checksum(),
            status: self.status.clone(),
            sigma_max: self.options.sigma_max,
            vertices: self.state.vertices.iter().map(|p| [p.x, p.y, p.z]).collect(),
            faces: self.state.faces.clone(),
            violating: panels.iter().filter(|p| p.broken).count(),
            panels,
        }
    }

    fn require_idle(&self) -> Result<()> {
        match self.status {
            RunStatus::Optimizing => Err(Error::Busy("an optimization is running".into())),
            _ => Ok(()),
        }
    }

    /// One level of Catmull-Clark subdivision followed by a fresh design
    /// initialization.
    pub fn subdivide(&mut self) -> Result<u64> {
        self.require_idle()?;
        let mesh = self.state.mesh()?.catmull_clark()?;
        let config = OptimizeConfig { criterion: self.options.criterion, ..Default::default() };
        self.state = initialize_design(&mesh, &*self.model, self.reference.as_deref(), &config)?;
        self.topo = self.state.topology()?;
        self.cache.clear();
        self.refresh()?;
        self.revision += 1;
        Ok(self.revision)
    }

    /// Moves one vertex, re-initializes the edge parameters around it and
    /// re-predicts the affected panels.
    pub fn move_vertex(&mut self, v: usize, pos: P3) -> Result<EditResult> {
        self.require_idle()?;
        if v >= self.state.vertices.len() {
            return Err(Error::Invalid(format!("vertex {v} does not exist")));
        }
        if !pos.iter().all(|c| c.is_finite()) {
            return Err(Error::Invalid("vertex position must be finite".into()));
        }
        if pos == self.state.vertices[v] {
            return Ok(EditResult { revision: self.revision, changed: false, repredicted: Vec::new(), panels: Vec::new() });
        }
        let mut vertices = self.state.vertices.clone();
        vertices[v] = pos;
        for (f, face) in self.topo.faces.iter().enumerate() {
            if face.contains(&v) {
                PanelBoundary::straight(face.map(|i| vertices[i]))
                    .and_then(|b| b.validate().and_then(|_| compact_encode(&b)))
                    .map_err(|e| Error::Invalid(format!("moving vertex {v} would make face {f} degenerate: {e}")))?;
            }
        }
        // edges whose edge-plane construction sees the moved vertex
        let mut near: BTreeSet<usize> = BTreeSet::from([v]);
        near.extend(self.topo.vertex_edges[v].iter().map(|&e| self.topo.other(e, v)));
        let edges: Vec<usize> =
            (0..self.topo.edges.len()).filter(|&e| self.topo.edges[e].iter().any(|a| near.contains(a))).collect();
        let planes = initial_planes(&self.topo, &vertices);
        let mesh_normals = match &self.reference {
            Some(_) => Vec::new(),
            None => QuadBaseMesh::new(vertices.clone(), self.state.faces.clone())?.vertex_normals(),
        };
        let normal = |x: usize| match &self.reference {
            Some(r) => r.closest(&vertices[x]).normal,
            None => mesh_normals[x],
        };
        for &e in &edges {
            let [a, b] = self.topo.edges[e];
            let s = planes[e];
            let at = |x: usize, y: usize| tangent_plane_angle(&(vertices[y] - vertices[x]).normalize(), &s, &normal(x), THETA_BOUND);
            self.state.s[e] = s;
            self.state.theta[e] = [at(a, b), at(b, a)];
        }
        self.state.vertices = vertices;
        let repredicted = self.refresh()?;
        self.revision += 1;
        let panels = repredicted.iter().map(|&f| self.panel(f, false)).collect();
        Ok(EditResult { revision: self.revision, changed: true, repredicted, panels })
    }

    /// Selects mixture component `mode` for face `f`.
    pub fn set_mode(&mut self, f: usize, mode: usize) -> Result<EditResult> {
        self.require_idle()?;
        if f >= self.state.faces.len() || mode >= 2 {
            return Err(Error::Invalid(format!("no mode {mode} on face {f}")));
        }
        if self.state.modes[f] == mode {
            return Ok(EditResult { revision: self.revision, changed: false, repredicted: Vec::new(), panels: Vec::new() });
        }
        self.state.modes[f] = mode;
        self.revision += 1;
        Ok(EditResult { revision: self.revision, changed: true, repredicted: Vec::new(), panels: vec![self.panel(f, false)] })
    }

    /// Installs a state produced by an optimization step of this session.
    pub fn publish(&mut self, state: DesignState) -> Result<u64> {
        if state.faces != self.state.faces {
            return Err(Error::Invalid("published state has a different mesh".into()));
        }
        self.state = state;
        self.refresh()?;
        self.revision += 1;
        Ok(self.revision)
    }
}
