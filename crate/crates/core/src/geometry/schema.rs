//! Versioned JSON documents for boundaries and patches.

use super::boundary::{EdgeCurveParams, PanelBoundary};
use super::patch::BezierPatch;
use crate::P3;
use serde::{Deserialize, Serialize};

pub const BOUNDARY_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub s: [f64; 3],
    pub theta: [f64; 2],
}

/// Corners in the order `c00, c30, c33, c03`; interior controls, when present,
/// in the order `c11, c12, c21, c22`, world coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDoc {
    pub version: u32,
    pub corners: [[f64; 3]; 4],
    pub edges: [EdgeDoc; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior: Option<[[f64; 3]; 4]>,
}

fn arr(p: &P3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

fn pt(a: &[f64; 3]) -> P3 {
    P3::new(a[0], a[1], a[2])
}

impl BoundaryDoc {
    pub fn new(b: &PanelBoundary, interior: Option<&[P3; 4]>) -> Self {
        Self {
            version: BOUNDARY_SCHEMA_VERSION,
            corners: b.corners.map(|c| arr(&c)),
            edges: b.edges.map(|e| EdgeDoc { s: arr(&e.s), theta: e.theta }),
            interior: interior.map(|i| i.map(|p| arr(&p))),
        }
    }

    pub fn boundary(&self) -> crate::Result<PanelBoundary> {
        if self.version != BOUNDARY_SCHEMA_VERSION {
            return Err(crate::Error::format(format!("unsupported boundary schema version {}", self.version)));
        }
        let b = PanelBoundary {
            corners: self.corners.map(|c| pt(&c)),
            edges: std::array::from_fn(|k| EdgeCurveParams { s: pt(&self.edges[k].s), theta: self.edges[k].theta }),
        };
        b.validate()?;
        Ok(b)
    }

    /// The patch with the stored interior, or the zero-twist patch.
    pub fn patch(&self) -> crate::Result<BezierPatch> {
        let b = self.boundary()?;
        Ok(match &self.interior {
            Some(i) => b.patch(&i.map(|p| pt(&p))),
            None => b.zero_twist_patch(),
        })
    }
}
