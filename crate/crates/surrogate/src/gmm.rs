//! Two-component diagonal Gaussian mixture head.
//!
//! Raw network outputs per sample: `K·D` means, `K·D` log-variances and `K`
//! mixture logits, in that order. Variances are `exp(s) + floor`.

use nalgebra::DMatrix;

pub const K: usize = 2;
/// Twelve interior-control coordinates plus the stress.
pub const D: usize = 13;
pub const OUTPUTS: usize = 2 * K * D + K;
pub const VARIANCE_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn mean_index(k: usize, d: usize) -> usize {
    k * D + d
}

pub fn logvar_index(k: usize, d: usize) -> usize {
    K * D + k * D + d
}

pub fn logit_index(k: usize) -> usize {
    2 * K * D + k
}

/// Mixture in the model's (standardized) output space.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMixture {
    pub pi: [f64; K],
    pub mean: [[f64; D]; K],
    pub var: [[f64; D]; K],
}

pub fn softmax(l: &[f64; K]) -> [f64; K] {
    let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = l.map(|x| (x - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|x| x / s)
}

pub fn decode(y: &[f64]) -> RawMixture {
    let logits = std::array::from_fn(|k| y[logit_index(k)]);
    RawMixture {
        pi: softmax(&logits),
        mean: std::array::from_fn(|k| std::array::from_fn(|d| y[mean_index(k, d)])),
        var: std::array::from_fn(|k| std::array::from_fn(|d| y[logvar_index(k, d)].exp() + VARIANCE_FLOOR)),
    }
}

fn log_sum_exp(v: &[f64; K]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `−log Σ_k π_k N(t | μ_k, diag v_k)` for one sample and, when `grad` is
/// given, its derivative with respect to the raw outputs.
pub fn sample_nll(y: &[f64], t: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let logits: [f64; K] = std::array::from_fn(|k| y[logit_index(k)]);
    let lse_l = log_sum_exp(&logits);
    let mut comp = [0.0; K];
    for k in 0..K {
        let mut ln = 0.0;
        for d in 0..D {
            let v = y[logvar_index(k, d)].exp() + VARIANCE_FLOOR;
            let r = t[d] - y[mean_index(k, d)];
            ln -= 0.5 * (LN_2PI + v.ln() + r * r / v);
        }
        comp[k] = logits[k] - lse_l + ln;
    }
    let total = log_sum_exp(&comp);
    if let Some(g) = grad {
        let pi = softmax(&logits);
        for k in 0..K {
            let post = (comp[k] - total).exp();
            g[logit_index(k)] = pi[k] - post;
            for d in 0..D {
                let e = y[logvar_index(k, d)].exp();
                let v = e + VARIANCE_FLOOR;
                let r = t[d] - y[mean_index(k, d)];
                g[mean_index(k, d)] = -post * r / v;
                g[logvar_index(k, d)] = post * 0.5 * (1.0 - r * r / v) * e / v;
            }
        }
    }
    -total
}

/// Summed NLL over the columns of `y` (outputs × batch) against `t`
/// (D × batch), with the gradient written into `dy` scaled by `scale`.
pub fn batch_nll(y: &DMatrix<f64>, t: &DMatrix<f64>, mut dy: Option<&mut DMatrix<f64>>, scale: f64) -> f64 {
    let mut sum = 0.0;
    let mut g = vec![0.0; OUTPUTS];
    for j in 0..y.ncols() {
        let yj = y.column(j);
        let tj = t.column(j);
        match dy.as_deref_mut() {
            Some(d) => {
                sum += sample_nll(yj.as_slice(), tj.as_slice(), Some(&mut g));
                for (dst, v) in d.column_mut(j).iter_mut().zip(g.iter()) {
                    *dst = scale * v;
                }
            }
            None => sum += sample_nll(yj.as_slice(), tj.as_slice(), None),
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_covers_all_outputs() {
        let mut seen = vec![false; OUTPUTS];
        for k in 0..K {
            for d in 0..D {
                seen[mean_index(k, d)] = true;
                seen[logvar_index(k, d)] = true;
            }
            seen[logit_index(k)] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(OUTPUTS, 54);
    }
}
