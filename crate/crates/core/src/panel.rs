//! One panel end to end: mesh an initial patch, find the minimal-energy
//! state, fit the Bézier interior to it and encode the result.

use crate::geometry::compact::{encode_panel, Encoded, Shape};
use crate::geometry::fit::{fit_interior_controls, FitResult, FitTarget, W_B};
use crate::geometry::{BezierPatch, PanelBoundary};
use crate::shell::{init_panel_mesh, minimize_panel, Material, MeshOptions, PanelEquilibrium, SolveError, SolverOptions, SolverStats};
use crate::P3;
use serde::{Deserialize, Serialize};

pub const PANEL_RECORD_VERSION: u32 = 1;

/// Initial surface handed to the simulator.
#[derive(Clone, Debug, PartialEq)]
pub enum InitMode {
    /// Corner twist vectors zero (parallelogram corner faces).
    ZeroTwist,
    /// A given patch over the same boundary, e.g. a surrogate prediction.
    Patch(BezierPatch),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    ZeroTwist,
    Given,
}

impl InitMode {
    pub fn kind(&self) -> InitKind {
        match self {
            InitMode::ZeroTwist => InitKind::ZeroTwist,
            InitMode::Patch(_) => InitKind::Given,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelConfig {
    pub material: Material,
    pub mesh: MeshOptions,
    pub solver: SolverOptions,
    /// Control-net regularizer of the interior fit.
    pub fit_weight: f64,
}

impl Default for PanelConfig {
    fn default() -> Self {
        Self { material: Material::default(), mesh: MeshOptions::default(), solver: SolverOptions::default(), fit_weight: W_B }
    }
}

/// Serializable summary of one simulated panel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub version: u32,
    /// Compact boundary encoding.
    pub p: [f64; 18],
    /// Fitted interior controls in the canonical adapted frame (mm).
    pub shape: Shape,
    pub sigma: f64,
    pub sigma_true: f64,
    pub energy: f64,
    pub fit_residual: f64,
    pub mesh_checksum: String,
    pub init: InitKind,
    pub material: Material,
    pub stats: SolverStats,
}

impl PanelRecord {
    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.version != PANEL_RECORD_VERSION {
            return Err(crate::Error::format(format!("unsupported panel record version {}", r.version)));
        }
        Ok(r)
    }
}

pub struct SimulatedPanel {
    pub record: PanelRecord,
    pub equilibrium: PanelEquilibrium,
    pub fit: FitResult,
    pub encoded: Encoded,
}

/// Fits the interior controls of `initial` (same boundary as `boundary`) to
/// the deformed surface of `eq`.
pub fn fit_equilibrium(
    boundary: &PanelBoundary,
    initial: &BezierPatch,
    eq: &PanelEquilibrium,
    w_b: f64,
) -> crate::Result<FitResult> {
    let mesh = &eq.mesh;
    let normals = mesh.vertex_normals();
    let areas = mesh.vertex_areas();
    let target = FitTarget { points: &mesh.x, normals: &normals, areas: &areas, uv_hint: Some(&mesh.uv) };
    fit_interior_controls(boundary, initial, &target, w_b)
}

pub fn simulate_panel(boundary: &PanelBoundary, init: &InitMode, cfg: &PanelConfig) -> Result<SimulatedPanel, SolveError> {
    boundary.validate()?;
    let initial = match init {
        InitMode::ZeroTwist => boundary.zero_twist_patch(),
        InitMode::Patch(p) => {
            let mut q = boundary.zero_twist_patch();
            q.set_interior(&p.interior());
            q
        }
    };
    let params = cfg.material.params()?;
    let mesh = init_panel_mesh(&initial, &cfg.mesh)?;
    let checksum = mesh.checksum();
    let equilibrium = minimize_panel(&mesh, &params, &cfg.solver)?;
    let fit = fit_equilibrium(boundary, &initial, &equilibrium, cfg.fit_weight)?;
    let (encoded, shape) = encode_panel(boundary, &fit.patch)?;
    let record = PanelRecord {
        version: PANEL_RECORD_VERSION,
        p: encoded.compact.p,
        shape,
        sigma: equilibrium.sigma,
        sigma_true: equilibrium.sigma_true,
        energy: equilibrium.energy,
        fit_residual: fit.residual,
        mesh_checksum: checksum,
        init: init.kind(),
        material: cfg.material,
        stats: equilibrium.stats.clone(),
    };
    Ok(SimulatedPanel { record, equilibrium, fit, encoded })
}

/// Second initialization for a boundary: the fitted interior reflected along
/// the adapted-frame normal about the zero-twist interior.
pub fn mirrored_init(boundary: &PanelBoundary, fitted: &BezierPatch) -> crate::Result<BezierPatch> {
    let frame = boundary.frame()?;
    let zt = boundary.zero_twist_patch();
    let z0 = zt.interior().map(|p| frame.to_local(&p));
    let fit = fitted.interior().map(|p| frame.to_local(&p));
    let mirrored: [P3; 4] = std::array::from_fn(|k| {
        let mut q = fit[k];
        q.z = 2.0 * z0[k].z - q.z;
        frame.to_world(&q)
    });
    Ok(boundary.patch(&mirrored))
}

/// Largest coordinate difference between two interior shapes (mm).
pub fn shape_distance(a: &Shape, b: &Shape) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
