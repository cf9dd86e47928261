//! Saddle-shaped facade used to exercise the design optimization: an
//! `n × n` quad grid on `z = x y / r` whose every panel is twisted, with the
//! smooth saddle as reference surface.

use coldbend_core::geometry::QuadBaseMesh;
use coldbend_core::P3;
use coldbend_design::ReferenceSurface;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleTestbed {
    pub panels_per_side: usize,
    /// Grid spacing in plan (mm).
    pub spacing: f64,
    /// Saddle radius `r` in `z = x y / r` (mm); smaller is more twisted.
    pub radius: f64,
    /// Reference triangles per grid spacing and direction.
    pub reference_refinement: usize,
}

impl Default for SaddleTestbed {
    fn default() -> Self {
        Self { panels_per_side: 10, spacing: 400.0, radius: 2000.0, reference_refinement: 4 }
    }
}

impl SaddleTestbed {
    pub fn height(&self, x: f64, y: f64) -> f64 {
        x * y / self.radius
    }

    fn point(&self, i: f64, j: f64) -> P3 {
        let c = self.panels_per_side as f64 / 2.0;
        let (x, y) = ((i - c) * self.spacing, (j - c) * self.spacing);
        P3::new(x, y, self.height(x, y))
    }

    pub fn mesh(&self) -> coldbend_core::Result<QuadBaseMesh> {
        let n = self.panels_per_side;
        QuadBaseMesh::grid(n, n, |i, j| self.point(i as f64, j as f64))
    }

    /// Triangulated saddle covering the grid with one spacing of margin.
    pub fn reference(&self) -> coldbend_design::Result<ReferenceSurface> {
        let k = self.reference_refinement.max(1);
        let m = (self.panels_per_side + 2) * k;
        let mut vertices = Vec::with_capacity((m + 1) * (m + 1));
        for j in 0..=m {
            for i in 0..=m {
                vertices.push(self.point(i as f64 / k as f64 - 1.0, j as f64 / k as f64 - 1.0));
            }
        }
        let id = |i: usize, j: usize| j * (m + 1) + i;
        let mut triangles = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        ReferenceSurface::new(vertices, triangles)
    }
}
