//! Adam training on the mixture negative log-likelihood with early stopping.

use crate::gmm::{self, D, OUTPUTS};
use crate::model::{MdnModel, ModelMeta, Standardization, INPUTS};
use crate::net::{self, Arch, Params};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Epochs without a new best validation loss before stopping.
    pub patience: usize,
    /// Hard cap on the number of epochs.
    pub max_epochs: usize,
    pub seed: u64,
    pub hidden: usize,
    pub blocks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch: 2048, learning_rate: 1e-4, l2: 1e-4, patience: 400, max_epochs: 1000, seed: 1, hidden: 512, blocks: 6 }
    }
}

/// Inputs `p` and targets `(shape, sigma)` in physical units.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Samples {
    pub inputs: Vec<[f64; INPUTS]>,
    pub targets: Vec<[f64; D]>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, p: [f64; INPUTS], t: [f64; D]) {
        self.inputs.push(p);
        self.targets.push(t);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_nll: f64,
    /// Epochs that set a new best validation loss.
    pub improving_epochs: usize,
    pub stopped_early: bool,
}

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &Params, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.1.len()]).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, params: &mut Params, grad: &Params) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let grads: Vec<Vec<f64>> = grad.tensors().into_iter().map(|t| t.1.to_vec()).collect();
        for (i, w) in params.tensors_mut().into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads[i]);
            for j in 0..w.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                w[j] -= self.lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Standardized batch matrices.
fn batch_matrices(norm: &Standardization, s: &Samples, idx: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut x = DMatrix::zeros(INPUTS, idx.len());
    let mut t = DMatrix::zeros(D, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        x.column_mut(j).copy_from_slice(&norm.input(&s.inputs[i]));
        t.column_mut(j).copy_from_slice(&norm.target(&s.targets[i]));
    }
    (x, t)
}

/// Loss `mean NLL + l2 Σ w²` of one batch and its parameter gradient.
pub fn loss_and_grad(params: &Params, x: &DMatrix<f64>, t: &DMatrix<f64>, l2: f64) -> (f64, f64, Params) {
    let n = x.ncols() as f64;
    let (y, cache) = net::forward_cached(params, x);
    let mut dy = DMatrix::zeros(OUTPUTS, x.ncols());
    let nll = gmm::batch_nll(&y, t, Some(&mut dy), 1.0 / n) / n;
    let mut g = params.zeros_like();
    net::backward(params, &cache, &dy, &mut g);
    let pen = l2 * params.weight_sq_norm();
    let weights: Vec<bool> = params.tensors().iter().map(|t| t.2).collect();
    let values: Vec<Vec<f64>> = params.tensors().iter().map(|t| t.1.to_vec()).collect();
    for (i, gt) in g.tensors_mut().into_iter().enumerate() {
        if weights[i] {
            for (gv, w) in gt.iter_mut().zip(&values[i]) {
                *gv += 2.0 * l2 * w;
            }
        }
    }
    (nll + pen, nll, g)
}

/// Trains a fresh model; `on_epoch` sees every epoch's statistics.
pub fn train(
    train: &Samples,
    val: &Samples,
    cfg: &TrainConfig,
    meta: ModelMeta,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(MdnModel, TrainReport)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Invalid("training and validation sets must be non-empty".into()));
    }
    if cfg.batch == 0 || !(cfg.learning_rate > 0.0) || cfg.l2 < 0.0 || cfg.max_epochs == 0 {
        return Err(Error::Invalid("batch, learning rate and epoch cap must be positive".into()));
    }
    let norm = Standardization::fit(&train.inputs, &train.targets);
    let arch = Arch { inputs: INPUTS, hidden: cfg.hidden, blocks: cfg.blocks, outputs: OUTPUTS };
    let mut model = MdnModel::new(arch, cfg.seed, norm, meta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut adam = Adam::new(&model.params, cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, 0usize, model.params.clone());
    let mut report = TrainReport { epochs: Vec::new(), best_epoch: 0, best_val_nll: f64::INFINITY, improving_epochs: 0, stopped_early: false };
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut count) = (0.0, 0usize);
        for idx in order.chunks(cfg.batch) {
            let (x, t) = batch_matrices(&model.norm, train, idx);
            let (loss, nll, g) = loss_and_grad(&model.params, &x, &t, cfg.l2);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            adam.step(&mut model.params, &g);
            sum += nll * idx.len() as f64;
            count += idx.len();
        }
        let val_nll = model.mean_nll(&val.inputs, &val.targets).map_err(|_| Error::Diverged { epoch })?;
        if !val_nll.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let stats = EpochStats { epoch, train_nll: sum / count as f64, val_nll };
        on_epoch(&stats);
        report.epochs.push(stats);
        if val_nll < best.0 {
            best = (val_nll, epoch, model.params.clone());
            report.improving_epochs += 1;
        } else if epoch - best.1 >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }
    report.best_epoch = best.1;
    report.best_val_nll = best.0;
    model.params = best.2;
    model.meta.training = Some(serde_json::json!({
        "config": cfg,
        "best_epoch": report.best_epoch,
        "best_val_nll": report.best_val_nll,
        "epochs": report.epochs.len(),
        "train_samples": train.len(),
        "val_samples": val.len(),
    }));
    Ok((model, report))
}
