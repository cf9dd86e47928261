use coldbend_core::shell::Material;
use coldbend_surrogate::gmm::{self, D, OUTPUTS, VARIANCE_FLOOR};
use coldbend_surrogate::model::{GmmPrediction, Mode};
use coldbend_surrogate::net::Arch;
use coldbend_surrogate::train::loss_and_grad;
use coldbend_surrogate::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_p(rng: &mut ChaCha8Rng) -> [f64; 18] {
    std::array::from_fn(|i| match i {
        0..=5 => rng.random_range(2e4..4e5),
        6..=9 => rng.random_range(-1.5..1.5),
        _ => rng.random_range(-0.087..0.087),
    })
}

fn norm_for(rng: &mut ChaCha8Rng) -> Standardization {
    let inputs: Vec<[f64; 18]> = (0..200).map(|_| random_p(rng)).collect();
    let targets: Vec<[f64; 13]> = (0..200).map(|_| std::array::from_fn(|d| rng.random_range(-50.0..50.0) + d as f64)).collect();
    Standardization::fit(&inputs, &targets)
}

fn tiny(seed: u64) -> MdnModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = norm_for(&mut rng);
    MdnModel::new(Arch { inputs: 18, hidden: 8, blocks: 2, outputs: OUTPUTS }, seed, norm, ModelMeta::default()).unwrap()
}

fn full(seed: u64) -> MdnModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = norm_for(&mut rng);
    MdnModel::new(MdnModel::default_arch(), seed, norm, ModelMeta::with_material(Material::default())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn mixture_weights_sum_to_one(seed in 0u64..1000, pseed in 0u64..1000) {
        let m = tiny(seed);
        let p = random_p(&mut ChaCha8Rng::seed_from_u64(pseed));
        let pred = m.forward(&p).unwrap();
        let pi = pred.pi();
        prop_assert!((pi[0] + pi[1] - 1.0).abs() < 1e-9);
        prop_assert!(pi.iter().all(|&x| x >= 0.0));
        let raw = gmm::decode(m.raw_outputs(&[p]).unwrap().column(0).as_slice());
        prop_assert!(raw.var.iter().flatten().all(|&v| v >= VARIANCE_FLOOR));
    }
}

#[test]
fn forward_is_deterministic_and_batch_consistent() {
    let m = full(3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ps: Vec<[f64; 18]> = (0..17).map(|_| random_p(&mut rng)).collect();
    let a = m.raw_outputs(&ps).unwrap();
    let b = m.raw_outputs(&ps).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
    for (j, p) in ps.iter().enumerate() {
        let single = m.raw_outputs(std::slice::from_ref(p)).unwrap();
        let diff = (single.column(0) - a.column(j)).amax();
        assert!(diff < 1e-12, "batched and single outputs differ by {diff}");
    }
}

fn diag_gaussian_nll(t: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut s = 0.0;
    for d in 0..t.len() {
        s += 0.5 * (2.0 * std::f64::consts::PI * var[d]).ln() + (t[d] - mean[d]).powi(2) / (2.0 * var[d]);
    }
    s
}

#[test]
fn collapsed_mixture_reduces_to_one_gaussian() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let mut y: Vec<f64> = (0..OUTPUTS).map(|_| rng.random_range(-1.0..1.0)).collect();
        y[gmm::logit_index(0)] = 800.0;
        y[gmm::logit_index(1)] = -800.0;
        let t: Vec<f64> = (0..D).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mean: Vec<f64> = (0..D).map(|d| y[gmm::mean_index(0, d)]).collect();
        let var: Vec<f64> = (0..D).map(|d| y[gmm::logvar_index(0, d)].exp() + VARIANCE_FLOOR).collect();
        let want = diag_gaussian_nll(&t, &mean, &var);
        let got = gmm::sample_nll(&y, &t, None);
        assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "{got} vs {want}");
    }
}

fn toy_batch(n: usize, seed: u64, norm: &Standardization) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(18, n);
    let mut t = DMatrix::zeros(D, n);
    for j in 0..n {
        x.column_mut(j).copy_from_slice(&norm.input(&random_p(&mut rng)));
        for d in 0..D {
            t[(d, j)] = rng.random_range(-1.5..1.5);
        }
    }
    (x, t)
}

#[test]
fn loss_gradient_matches_central_differences() {
    let m = tiny(11);
    let (x, t) = toy_batch(6, 2, &m.norm);
    let l2 = 1e-2;
    let (_, _, g) = loss_and_grad(&m.params, &x, &t, l2);
    let grads: Vec<f64> = g.tensors().iter().flat_map(|t| t.1.to_vec()).collect();
    let gmax = grads.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut flat = 0;
    let n_tensors = m.params.tensors().len();
    for ti in 0..n_tensors {
        let len = m.params.tensors()[ti].1.len();
        for j in 0..len {
            let eval = |delta: f64| {
                let mut p = m.params.clone();
                p.tensors_mut()[ti][j] += delta;
                loss_and_grad(&p, &x, &t, l2).0
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            worst = worst.max((fd - grads[flat]).abs());
            flat += 1;
        }
    }
    assert!(worst / gmax < 1e-5, "max gradient error {worst} relative to {gmax}");
}

#[test]
fn doubling_l2_adds_the_penalty_once_more() {
    let m = tiny(4);
    let (x, t) = toy_batch(5, 3, &m.norm);
    let (a, nll, _) = loss_and_grad(&m.params, &x, &t, 1e-4);
    let (b, _, _) = loss_and_grad(&m.params, &x, &t, 2e-4);
    let pen = 1e-4 * m.params.weight_sq_norm();
    assert!(((b - a) - pen).abs() < 1e-12 * b.abs().max(1.0));
    assert!((a - nll - pen).abs() < 1e-12 * a.abs().max(1.0));
}

fn fd_jacobian(m: &MdnModel, p: &[f64; 18]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(OUTPUTS, 18);
    for i in 0..18 {
        let h = 1e-6 * m.norm.in_std[i];
        let mut a = *p;
        let mut b = *p;
        a[i] += h;
        b[i] -= h;
        let d = (m.raw_outputs(&[a]).unwrap() - m.raw_outputs(&[b]).unwrap()) / (2.0 * h);
        j.column_mut(i).copy_from(&d.column(0));
    }
    j
}

#[test]
fn input_jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for m in [tiny(1), full(2)] {
        for _ in 0..3 {
            let p = random_p(&mut rng);
            let jac = m.input_jacobian(&p).unwrap();
            let fd = fd_jacobian(&m, &p);
            for i in 0..18 {
                let scale = fd.column(i).amax().max(1e-8);
                let err = (jac.raw.column(i) - fd.column(i)).amax();
                assert!(err / scale < 1e-5, "column {i}: error {err} relative to {scale}");
            }
            // physical mean and π derivatives follow from the raw ones
            let pi_fd = |i: usize| {
                let h = 1e-6 * m.norm.in_std[i];
                let mut a = p;
                let mut b = p;
                a[i] += h;
                b[i] -= h;
                let (pa, pb) = (m.forward(&a).unwrap(), m.forward(&b).unwrap());
                ((pa.modes[0].pi - pb.modes[0].pi) / (2.0 * h), (pa.modes[1].sigma - pb.modes[1].sigma) / (2.0 * h))
            };
            let (jp, jm) = (jac.pi(), jac.mean(1));
            for i in [0, 7, 15] {
                let (dpi, dsig) = pi_fd(i);
                assert!((jp[(0, i)] - dpi).abs() <= 1e-5 * dpi.abs().max(1e-6));
                assert!((jm[(12, i)] - dsig).abs() <= 1e-5 * dsig.abs().max(1e-6));
            }
        }
    }
}

#[test]
fn zero_head_gives_zero_mean_jacobian() {
    let mut m = tiny(8);
    m.params.w_out.fill(0.0);
    let p = random_p(&mut ChaCha8Rng::seed_from_u64(1));
    let jac = m.input_jacobian(&p).unwrap();
    for k in 0..2 {
        assert_eq!(jac.mean(k).amax(), 0.0);
    }
}

#[test]
fn linear_network_has_constant_jacobian() {
    let norm = norm_for(&mut ChaCha8Rng::seed_from_u64(2));
    let mut m = MdnModel::new(Arch { inputs: 18, hidden: 16, blocks: 0, outputs: OUTPUTS }, 3, norm, ModelMeta::default()).unwrap();
    // keep every pre-activation positive so the ELU is the identity
    m.params.b_in.fill(1e3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let j0 = m.input_jacobian(&random_p(&mut rng)).unwrap().raw;
    for _ in 0..5 {
        let j = m.input_jacobian(&random_p(&mut rng)).unwrap().raw;
        assert!((j - &j0).amax() < 1e-12 * j0.amax());
    }
}

#[test]
fn save_load_reproduces_outputs_exactly() {
    let m = full(6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    m.save(&path).unwrap();
    let back = MdnModel::load(&path).unwrap();
    assert_eq!(back.meta, m.meta);
    assert_eq!(back.meta.material, Some(Material::default()));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ps: Vec<[f64; 18]> = (0..8).map(|_| random_p(&mut rng)).collect();
    let (a, b) = (m.raw_outputs(&ps).unwrap(), back.raw_outputs(&ps).unwrap());
    assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));

    let bytes = std::fs::read(&path).unwrap();
    for cut in [4, 20, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(MdnModel::from_bytes(&bytes[..cut]), Err(Error::Format(_))), "cut at {cut}");
    }
    let mut bad = bytes.clone();
    bad[8] = 99;
    assert!(matches!(MdnModel::from_bytes(&bad), Err(Error::Format(_))));
}

fn prediction(pi: [f64; 2], sigma: [f64; 2], shapes: [[f64; 12]; 2]) -> GmmPrediction {
    GmmPrediction { modes: std::array::from_fn(|k| Mode { pi: pi[k], shape: shapes[k], sigma: sigma[k], var: [1.0; 13] }) }
}

#[test]
fn probability_rules_pick_the_admissible_modes() {
    let shapes = [[0.0; 12], [5.0; 12]];
    let p = prediction([0.97, 0.03], [40.0, 10.0], shapes);
    let s = select(&p, &Criterion::MinStress);
    assert_eq!(s.modes.len(), 1);
    assert_eq!(s.best_component(), 0);

    let p = prediction([0.5, 0.5], [40.0, 10.0], shapes);
    let s = select(&p, &Criterion::MinStress);
    assert_eq!(s.modes.len(), 2);
    assert_eq!(s.best_component(), 1);

    let p = prediction([0.6, 0.4], [10.0, 40.0], shapes);
    assert_eq!(select(&p, &Criterion::ClosestTo(&shapes[1])).best_component(), 1);
    let score = |m: &Mode| -m.sigma;
    assert_eq!(select(&p, &Criterion::Score(&score)).best_component(), 1);

    let p = prediction([0.96, 0.04], [10.0, 40.0], shapes);
    assert_eq!(admissible(&p), vec![0]);
    let p = prediction([0.02, 0.98], [10.0, 40.0], shapes);
    assert_eq!(admissible(&p), vec![1]);
}

/// Smooth synthetic map from `p` to an interior shape.
fn synthetic_shape(p: &[f64; 18]) -> [f64; 12] {
    let a = (p[0] / 1e5).sqrt();
    let g = p[6] + 0.5 * p[7];
    std::array::from_fn(|d| 10.0 * ((d as f64 + 1.0) * 0.3 * a + g).sin() + 3.0 * p[10 + d % 8] * 10.0)
}

fn synthetic_set(n: usize, seed: u64, two_modes: bool) -> Samples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Samples::default();
    for i in 0..n {
        let p = random_p(&mut rng);
        let mut shape = synthetic_shape(&p);
        let mut sigma = 40.0 + 10.0 * p[6];
        if two_modes && i % 2 == 1 {
            // the mirror mode: normal coordinates reflected
            for k in 0..4 {
                shape[3 * k + 2] = -shape[3 * k + 2] - 20.0;
            }
            sigma += 15.0;
        }
        let mut t = [0.0; 13];
        t[..12].copy_from_slice(&shape);
        t[12] = sigma;
        s.push(p, t);
    }
    s
}

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig { batch: 128, learning_rate: 2e-3, l2: 1e-6, patience: epochs, max_epochs: epochs, seed: 3, hidden: 64, blocks: 2 }
}

#[test]
fn training_loss_decreases_on_a_toy_set() {
    let data = synthetic_set(500, 1, false);
    let val = synthetic_set(100, 2, false);
    let cfg = TrainConfig { max_epochs: 20, ..TrainConfig::default() };
    let (_, report) = train(&data, &val, &cfg, ModelMeta::default(), |_| {}).unwrap();
    let nll: Vec<f64> = report.epochs.iter().map(|e| e.train_nll).collect();
    assert_eq!(nll.len(), 20);
    assert!(nll.windows(2).all(|w| w[1] < w[0]), "{nll:?}");
}

#[test]
fn training_is_reproducible() {
    let data = synthetic_set(300, 1, true);
    let val = synthetic_set(60, 2, true);
    let cfg = small_config(5);
    let (a, ra) = train(&data, &val, &cfg, ModelMeta::default(), |_| {}).unwrap();
    let (b, rb) = train(&data, &val, &cfg, ModelMeta::default(), |_| {}).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a.params, b.params);
}

#[test]
fn single_mode_data_concentrates_the_mixture() {
    let data = synthetic_set(2000, 1, false);
    let val = synthetic_set(200, 2, false);
    let (m, _) = train(&data, &val, &small_config(150), ModelMeta::default(), |_| {}).unwrap();
    let held = synthetic_set(50, 3, false);
    let preds = m.forward_batch(&held.inputs).unwrap();
    let concentrated = preds.iter().filter(|p| p.pi()[0].max(p.pi()[1]) > 0.95).count();
    assert!(concentrated >= 45, "only {concentrated}/50 predictions have one dominant component");
}

#[test]
fn two_mode_data_recovers_both_modes() {
    let data = synthetic_set(4000, 1, true);
    let val = synthetic_set(400, 2, true);
    let (m, _) = train(&data, &val, &small_config(150), ModelMeta::default(), |_| {}).unwrap();
    let held = synthetic_set(40, 3, true);
    let mut worst = 0.0f64;
    for (i, p) in held.inputs.iter().enumerate().step_by(2) {
        let a = &held.targets[i];
        // the other mode at this p, built the same way as the training data
        let mut mirror = *a;
        for k in 0..4 {
            mirror[3 * k + 2] = -a[3 * k + 2] - 20.0;
        }
        let pred = m.forward(p).unwrap();
        let dist = |k: usize, t: &[f64; 13]| (0..12).map(|d| (pred.modes[k].shape[d] - t[d]).abs()).fold(0.0, f64::max);
        let direct = dist(0, a).max(dist(1, &mirror));
        let swapped = dist(1, a).max(dist(0, &mirror));
        worst = worst.max(direct.min(swapped));
    }
    assert!(worst < 2.0, "worst mode error {worst} mm");
}
