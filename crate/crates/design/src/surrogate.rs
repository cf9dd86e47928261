//! What the optimizer needs from a shape and stress predictor.

use crate::Result;
use coldbend_surrogate::{GmmPrediction, MdnModel, INPUTS};
use nalgebra::DMatrix;

pub trait Surrogate: Sync {
    fn predict(&self, ps: &[[f64; INPUTS]]) -> Result<Vec<GmmPrediction>>;

    /// Prediction plus, per component, `∂(shape, σ)/∂p` (13 × 18).
    fn predict_with_jacobian(&self, p: &[f64; INPUTS]) -> Result<(GmmPrediction, Vec<DMatrix<f64>>)>;

    /// Whether `p` lies where the predictor can be trusted.
    fn in_domain(&self, p: &[f64; INPUTS]) -> bool;
}

impl Surrogate for MdnModel {
    fn predict(&self, ps: &[[f64; INPUTS]]) -> Result<Vec<GmmPrediction>> {
        Ok(self.forward_batch(ps)?)
    }

    fn predict_with_jacobian(&self, p: &[f64; INPUTS]) -> Result<(GmmPrediction, Vec<DMatrix<f64>>)> {
        let j = self.input_jacobian(p)?;
        let per_mode = (0..j.prediction.modes.len()).map(|k| j.mean(k)).collect();
        Ok((j.prediction, per_mode))
    }

    fn in_domain(&self, p: &[f64; INPUTS]) -> bool {
        MdnModel::in_domain(self, p)
    }
}
