//! Trains a small mixture density network on freshly simulated panels and
//! reports its accuracy on the held-out panels.

use coldbend_dataset::{generate_dataset, GenerateConfig, Split};
use coldbend_surrogate::metrics::evaluate;
use coldbend_surrogate::{train, ModelMeta, TrainConfig};

fn main() -> anyhow::Result<()> {
    let ds = generate_dataset(&GenerateConfig { count: 60, validation_fraction: 0.2, ..GenerateConfig::default() })?;
    let (tr, val) = (ds.samples_of(Split::Train), ds.samples_of(Split::Validation));
    let cfg = TrainConfig { batch: 64, learning_rate: 1e-3, hidden: 64, blocks: 2, max_epochs: 60, patience: 20, ..TrainConfig::default() };
    let (model, report) = train(&tr, &val, &cfg, ModelMeta::with_material(ds.header.material), |s| {
        if s.epoch % 10 == 0 {
            println!("epoch {:3}: validation NLL {:.3}", s.epoch, s.val_nll);
        }
    })?;
    let r = evaluate(&model, &val, Some(&ds.sigma_true_of(Split::Validation)))?;
    println!("best epoch {}, stress MAE {:.2} MPa against {:.2} MPa for the global mean", report.best_epoch, r.stress_mae, r.baseline_stress_mae);
    Ok(())
}
