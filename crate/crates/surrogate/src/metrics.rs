//! Held-out accuracy of a trained model.

use crate::model::MdnModel;
use crate::predict::admissible;
use crate::train::Samples;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Stress limit used for the feasibility confusion rates (MPa).
pub const STRESS_LIMIT: f64 = 65.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub nll: f64,
    /// Mean absolute interior-control error of the most probable mode (mm).
    pub shape_mae: f64,
    /// Same, using the admissible mode closest to the truth.
    pub shape_mae_closest: f64,
    /// Shape error of the most probable mode on panels with σ below the limit.
    pub shape_mae_feasible: f64,
    pub stress_mae: f64,
    pub stress_mae_closest: f64,
    /// Stress error on panels with true σ in [50, 65] MPa.
    pub stress_mae_region: f64,
    /// Error of always predicting the training mean stress.
    pub baseline_stress_mae: f64,
    /// Fraction of panels whose maximal stress exceeds the limit while the
    /// most probable mode predicts a feasible panel.
    pub false_negative_rate: f64,
    /// Fraction of panels predicted infeasible while the maximal stress is
    /// within the limit.
    pub false_positive_rate: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Evaluates `model` on `data`; `sigma_true` holds the maximal engineering
/// stress of each sample for the confusion rates (the targets' σ otherwise).
pub fn evaluate(model: &MdnModel, data: &Samples, sigma_true: Option<&[f64]>) -> Result<EvalReport> {
    let nll = model.mean_nll(&data.inputs, &data.targets)?;
    let preds = model.forward_batch(&data.inputs)?;
    let baseline = model.norm.out_mean[12];
    let (mut shape, mut shape_c, mut shape_f, mut stress, mut stress_c, mut stress_r, mut base) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let (mut fneg, mut fpos) = (0usize, 0usize);
    for (i, pred) in preds.iter().enumerate() {
        let t = &data.targets[i];
        let shape_err = |k: usize| (0..12).map(|d| (pred.modes[k].shape[d] - t[d]).abs()).sum::<f64>() / 12.0;
        let adm = admissible(pred);
        let top = adm[0];
        let closest = adm.iter().cloned().min_by(|&a, &b| shape_err(a).total_cmp(&shape_err(b))).unwrap_or(top);
        let sig = t[12];
        shape.push(shape_err(top));
        shape_c.push(shape_err(closest));
        if sig < STRESS_LIMIT {
            shape_f.push(shape_err(top));
        }
        let e = (pred.modes[top].sigma - sig).abs();
        stress.push(e);
        stress_c.push((pred.modes[closest].sigma - sig).abs());
        if (50.0..=STRESS_LIMIT).contains(&sig) {
            stress_r.push(e);
        }
        base.push((baseline - sig).abs());
        let truth = sigma_true.map(|s| s[i]).unwrap_or(sig);
        let predicted_fail = pred.modes[top].sigma > STRESS_LIMIT;
        if truth > STRESS_LIMIT && !predicted_fail {
            fneg += 1;
        }
        if truth <= STRESS_LIMIT && predicted_fail {
            fpos += 1;
        }
    }
    let n = data.len().max(1) as f64;
    Ok(EvalReport {
        count: data.len(),
        nll,
        shape_mae: mean(&shape),
        shape_mae_closest: mean(&shape_c),
        shape_mae_feasible: mean(&shape_f),
        stress_mae: mean(&stress),
        stress_mae_closest: mean(&stress_c),
        stress_mae_region: mean(&stress_r),
        baseline_stress_mae: mean(&base),
        false_negative_rate: fneg as f64 / n,
        false_positive_rate: fpos as f64 / n,
    })
}
