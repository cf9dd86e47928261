//! Surface stresses of a panel and their aggregation.

use super::element::{piola2, strains};
use super::material::MaterialParams;
use super::mesh::TriPanelMesh;
use serde::{Deserialize, Serialize};

/// Default exponent of the aggregated stress.
pub const STRESS_NORM_P: f64 = 12.0;

/// Singular values of the first Piola-Kirchhoff stress at both faces.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StressField {
    /// Descending singular values at `z = +h/2` (MPa).
    pub top: Vec<[f64; 2]>,
    /// Descending singular values at `z = -h/2` (MPa).
    pub bottom: Vec<[f64; 2]>,
    /// Rest areas (mm²).
    pub areas: Vec<f64>,
}

fn singular_values(p: &nalgebra::Matrix3x2<f64>) -> [f64; 2] {
    let g = p.transpose() * p;
    let (a, b, c) = (g[(0, 0)], g[(0, 1)], g[(1, 1)]);
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    [(mid + rad).max(0.0).sqrt(), (mid - rad).max(0.0).sqrt()]
}

pub fn stress_field(mesh: &TriPanelMesh, m: &MaterialParams) -> crate::Result<StressField> {
    let n = mesh.topo.tris.len();
    let mut out = StressField { top: Vec::with_capacity(n), bottom: Vec::with_capacity(n), areas: Vec::with_capacity(n) };
    for t in 0..n {
        let inp = mesh.element_input(t);
        let (e, b, f) = strains(&inp).ok_or_else(|| crate::Error::numerical(format!("degenerate triangle {t}")))?;
        let half = 0.5 * m.h;
        out.top.push(singular_values(&(f * piola2(&(e + b * half), m))));
        out.bottom.push(singular_values(&(f * piola2(&(e - b * half), m))));
        out.areas.push(mesh.rest_area(t));
    }
    Ok(out)
}

impl StressField {
    /// Largest principal stress magnitude of each element over both faces.
    pub fn element_max(&self) -> Vec<f64> {
        self.top.iter().zip(&self.bottom).map(|(t, b)| t[0].max(b[0])).collect()
    }
}

/// Area-weighted normalized `L_p` mean of the per-element maximal stress.
pub fn aggregate_stress(field: &StressField, p: f64) -> f64 {
    let s = field.element_max();
    let smax = s.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return 0.0;
    }
    let total: f64 = field.areas.iter().sum();
    // factor out the maximum to stay finite for large p
    let acc: f64 = s.iter().zip(&field.areas).map(|(v, a)| a * (v / smax).powf(p)).sum();
    smax * (acc / total).powf(1.0 / p)
}

/// Largest principal stress over all elements and both faces.
pub fn max_engineering_stress(field: &StressField) -> f64 {
    field.element_max().into_iter().fold(0.0, f64::max)
}
