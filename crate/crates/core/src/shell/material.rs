//! Glass material constants.

use serde::{Deserialize, Serialize};

/// Young's modulus and Poisson ratio of the glass, thickness in mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub young: f64,
    pub poisson: f64,
    pub thickness: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self { young: 70_000.0, poisson: 0.22, thickness: 1.0 }
    }
}

/// Lamé parameters as used by the shell energies.
///
/// `lambda` and `mu` are the three-dimensional Lamé constants. The membrane
/// energy and the stress evaluation use the thin-plate reduction
/// `lambda_membrane = 2 λ μ / (λ + 2μ)`; the bending energy uses the ratio
/// `λ / (λ + 2μ)`. Together they are the classical Koiter plate constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub lambda: f64,
    pub mu: f64,
    pub h: f64,
}

impl MaterialParams {
    pub fn new(lambda: f64, mu: f64, h: f64) -> crate::Result<Self> {
        if !(mu > 0.0 && lambda >= 0.0 && h > 0.0) || !(lambda.is_finite() && mu.is_finite() && h.is_finite()) {
            return Err(crate::Error::invalid(format!("material needs mu > 0, lambda >= 0, h > 0 (got {lambda}, {mu}, {h})")));
        }
        Ok(Self { lambda, mu, h })
    }

    pub fn lambda_membrane(&self) -> f64 {
        2.0 * self.lambda * self.mu / (self.lambda + 2.0 * self.mu)
    }

    pub fn bending_ratio(&self) -> f64 {
        self.lambda / (self.lambda + 2.0 * self.mu)
    }

    pub fn with_thickness(&self, h: f64) -> Self {
        Self { h, ..*self }
    }
}

impl Material {
    pub fn params(&self) -> crate::Result<MaterialParams> {
        let (e, nu) = (self.young, self.poisson);
        if !(e > 0.0) || !(0.0..0.5).contains(&nu) {
            return Err(crate::Error::invalid(format!("material needs E > 0 and 0 <= nu < 0.5 (got {e}, {nu})")));
        }
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        MaterialParams::new(lambda, mu, self.thickness)
    }

    /// Surface stress of a cylindrical bend of radius `r` in plate theory.
    pub fn plate_bending_stress(&self, r: f64) -> f64 {
        self.young * self.thickness / (2.0 * r * (1.0 - self.poisson * self.poisson))
    }
}
