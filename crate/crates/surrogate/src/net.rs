//! Residual ELU network with layer normalization: forward pass, reverse-mode
//! parameter gradients and forward-mode input tangents.
//!
//! Layout: `h0 = elu(W_in x + b_in)`, then per block
//! `h' = LN(h + elu(W h + b))`, and a linear head `y = W_out h_L + b_out`.
//! Batches are stored column-wise (one sample per column).

use crate::dense::gemm;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub inputs: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub outputs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub gamma: DVector<f64>,
    pub beta: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub w_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub blocks: Vec<Block>,
    pub w_out: DMatrix<f64>,
    pub b_out: DVector<f64>,
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

fn add_bias(m: &mut DMatrix<f64>, b: &DVector<f64>) {
    for mut col in m.column_iter_mut() {
        col += b;
    }
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    let mut s = DVector::zeros(m.nrows());
    for col in m.column_iter() {
        s += col;
    }
    s
}

/// Per-column normalization; returns `(n̂, 1/std)`.
fn normalize_columns(u: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = u.nrows() as f64;
    let mut out = u.clone();
    let mut inv = Vec::with_capacity(u.ncols());
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let var = col.norm_squared() / n;
        let is = 1.0 / (var + LN_EPS).sqrt();
        col *= is;
        inv.push(is);
    }
    (out, inv)
}

fn scale_affine(nhat: &DMatrix<f64>, gamma: &DVector<f64>, beta: &DVector<f64>) -> DMatrix<f64> {
    let mut h = nhat.clone();
    for mut col in h.column_iter_mut() {
        col.component_mul_assign(gamma);
        col += beta;
    }
    h
}

impl Params {
    /// LeCun-normal weights, zero biases, unit LN gains.
    pub fn init<R: Rng + ?Sized>(arch: &Arch, rng: &mut R) -> Self {
        let mut dense = |rows: usize, cols: usize| {
            let s = (1.0 / cols as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            })
        };
        let w_in = dense(arch.hidden, arch.inputs);
        let blocks = (0..arch.blocks)
            .map(|_| Block {
                w: dense(arch.hidden, arch.hidden),
                b: DVector::zeros(arch.hidden),
                gamma: DVector::from_element(arch.hidden, 1.0),
                beta: DVector::zeros(arch.hidden),
            })
            .collect();
        let w_out = dense(arch.outputs, arch.hidden);
        Self { w_in, b_in: DVector::zeros(arch.hidden), blocks, w_out, b_out: DVector::zeros(arch.outputs) }
    }

    pub fn zeros(arch: &Arch) -> Self {
        let (h, i, o) = (arch.hidden, arch.inputs, arch.outputs);
        Self {
            w_in: DMatrix::zeros(h, i),
            b_in: DVector::zeros(h),
            blocks: (0..arch.blocks)
                .map(|_| Block { w: DMatrix::zeros(h, h), b: DVector::zeros(h), gamma: DVector::zeros(h), beta: DVector::zeros(h) })
                .collect(),
            w_out: DMatrix::zeros(o, h),
            b_out: DVector::zeros(o),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |m: &DMatrix<f64>| DMatrix::zeros(m.nrows(), m.ncols());
        let zv = |v: &DVector<f64>| DVector::zeros(v.len());
        Self {
            w_in: z(&self.w_in),
            b_in: zv(&self.b_in),
            blocks: self.blocks.iter().map(|b| Block { w: z(&b.w), b: zv(&b.b), gamma: zv(&b.gamma), beta: zv(&b.beta) }).collect(),
            w_out: z(&self.w_out),
            b_out: zv(&self.b_out),
        }
    }

    pub fn arch(&self) -> Arch {
        Arch { inputs: self.w_in.ncols(), hidden: self.w_in.nrows(), blocks: self.blocks.len(), outputs: self.w_out.nrows() }
    }

    /// Named tensors in a fixed order, flagged when they are dense weights
    /// (the L2-penalized set).
    pub fn tensors(&self) -> Vec<(String, &[f64], bool)> {
        let mut v: Vec<(String, &[f64], bool)> = vec![("w_in".into(), self.w_in.as_slice(), true), ("b_in".into(), self.b_in.as_slice(), false)];
        for (i, b) in self.blocks.iter().enumerate() {
            v.push((format!("block{i}.w"), b.w.as_slice(), true));
            v.push((format!("block{i}.b"), b.b.as_slice(), false));
            v.push((format!("block{i}.gamma"), b.gamma.as_slice(), false));
            v.push((format!("block{i}.beta"), b.beta.as_slice(), false));
        }
        v.push(("w_out".into(), self.w_out.as_slice(), true));
        v.push(("b_out".into(), self.b_out.as_slice(), false));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![self.w_in.as_mut_slice(), self.b_in.as_mut_slice()];
        for b in self.blocks.iter_mut() {
            v.push(b.w.as_mut_slice());
            v.push(b.b.as_mut_slice());
            v.push(b.gamma.as_mut_slice());
            v.push(b.beta.as_mut_slice());
        }
        v.push(self.w_out.as_mut_slice());
        v.push(self.b_out.as_mut_slice());
        v
    }

    /// Tensor shapes `(rows, cols)` in `tensors` order.
    pub fn shapes(arch: &Arch) -> Vec<(usize, usize)> {
        let (h, i, o) = (arch.hidden, arch.inputs, arch.outputs);
        let mut v = vec![(h, i), (h, 1)];
        for _ in 0..arch.blocks {
            v.extend([(h, h), (h, 1), (h, 1), (h, 1)]);
        }
        v.extend([(o, h), (o, 1)]);
        v
    }

    pub fn from_flat(arch: &Arch, data: &[Vec<f64>]) -> Option<Self> {
        let shapes = Self::shapes(arch);
        if data.len() != shapes.len() || data.iter().zip(&shapes).any(|(d, (r, c))| d.len() != r * c) {
            return None;
        }
        let mut p = Self::zeros(arch);
        for (dst, src) in p.tensors_mut().into_iter().zip(data) {
            dst.copy_from_slice(src);
        }
        Some(p)
    }

    /// `Σ w²` over the dense weights.
    pub fn weight_sq_norm(&self) -> f64 {
        self.tensors().iter().filter(|t| t.2).map(|t| t.1.iter().map(|x| x * x).sum::<f64>()).sum()
    }
}

/// Intermediate values kept for the backward pass.
pub struct Cache {
    x: DMatrix<f64>,
    a0: DMatrix<f64>,
    /// `h[0] .. h[L]`.
    h: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    nhat: Vec<DMatrix<f64>>,
    inv_std: Vec<Vec<f64>>,
}

pub fn forward(p: &Params, x: &DMatrix<f64>) -> DMatrix<f64> {
    forward_cached(p, x).0
}

pub fn forward_cached(p: &Params, x: &DMatrix<f64>) -> (DMatrix<f64>, Cache) {
    let n = x.ncols();
    let hid = p.w_in.nrows();
    let mut a0 = DMatrix::zeros(hid, n);
    gemm(1.0, &p.w_in, false, x, false, 0.0, &mut a0);
    add_bias(&mut a0, &p.b_in);
    let mut h = vec![a0.map(elu)];
    let mut zs = Vec::with_capacity(p.blocks.len());
    let mut nhats = Vec::with_capacity(p.blocks.len());
    let mut invs = Vec::with_capacity(p.blocks.len());
    for blk in &p.blocks {
        let hi = h.last().expect("input layer output");
        let mut z = DMatrix::zeros(hid, n);
        gemm(1.0, &blk.w, false, hi, false, 0.0, &mut z);
        add_bias(&mut z, &blk.b);
        let mut u = z.map(elu);
        u += hi;
        let (nhat, inv) = normalize_columns(&u);
        h.push(scale_affine(&nhat, &blk.gamma, &blk.beta));
        zs.push(z);
        nhats.push(nhat);
        invs.push(inv);
    }
    let last = h.last().expect("hidden output");
    let mut out = DMatrix::zeros(p.w_out.nrows(), n);
    gemm(1.0, &p.w_out, false, last, false, 0.0, &mut out);
    add_bias(&mut out, &p.b_out);
    (out, Cache { x: x.clone(), a0, h, z: zs, nhat: nhats, inv_std: invs })
}

/// Accumulates `∂L/∂params` into `g` given `dout = ∂L/∂y` (outputs × batch).
pub fn backward(p: &Params, c: &Cache, dout: &DMatrix<f64>, g: &mut Params) {
    let n = dout.ncols();
    let hid = p.w_in.nrows();
    let last = c.h.last().expect("hidden output");
    gemm(1.0, dout, false, last, true, 1.0, &mut g.w_out);
    g.b_out += row_sums(dout);
    let mut dh = DMatrix::zeros(hid, n);
    gemm(1.0, &p.w_out, true, dout, false, 0.0, &mut dh);
    let nf = hid as f64;
    for (i, blk) in p.blocks.iter().enumerate().rev() {
        let nhat = &c.nhat[i];
        let gb = &mut g.blocks[i];
        // affine part of the layer norm
        let mut dn = dh.clone();
        for (j, mut col) in dn.column_iter_mut().enumerate() {
            let dy = dh.column(j);
            gb.beta += dy;
            gb.gamma += dy.component_mul(&nhat.column(j));
            col.component_mul_assign(&blk.gamma);
        }
        // normalization
        let mut du = dn;
        for (j, mut col) in du.column_iter_mut().enumerate() {
            let nh = nhat.column(j);
            let m1 = col.sum() / nf;
            let m2 = col.dot(&nh) / nf;
            let is = c.inv_std[i][j];
            for (v, &q) in col.iter_mut().zip(nh.iter()) {
                *v = is * (*v - m1 - q * m2);
            }
        }
        // residual branch
        let mut dz = du.clone();
        dz.zip_apply(&c.z[i], |d, z| *d *= elu_grad(z));
        gemm(1.0, &dz, false, &c.h[i], true, 1.0, &mut gb.w);
        gb.b += row_sums(&dz);
        dh = du;
        gemm(1.0, &blk.w, true, &dz, false, 1.0, &mut dh);
    }
    let mut da = dh;
    da.zip_apply(&c.a0, |d, a| *d *= elu_grad(a));
    gemm(1.0, &da, false, &c.x, true, 1.0, &mut g.w_in);
    g.b_in += row_sums(&da);
}

/// Output value and `∂y/∂x` (outputs × inputs) for one input column.
pub fn forward_tangent(p: &Params, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let hid = p.w_in.nrows();
    let nf = hid as f64;
    let a0 = &p.w_in * x + &p.b_in;
    let mut h = a0.map(elu);
    let mut t = p.w_in.clone();
    for (r, a) in a0.iter().enumerate() {
        t.row_mut(r).scale_mut(elu_grad(*a));
    }
    for blk in &p.blocks {
        let z = &blk.w * &h + &blk.b;
        let mut tz = DMatrix::zeros(hid, t.ncols());
        gemm(1.0, &blk.w, false, &t, false, 0.0, &mut tz);
        for (r, zr) in z.iter().enumerate() {
            tz.row_mut(r).scale_mut(elu_grad(*zr));
        }
        let u = z.map(elu) + &h;
        let tu = tz + &t;
        let mean = u.sum() / nf;
        let centered = u.add_scalar(-mean);
        let is = 1.0 / (centered.norm_squared() / nf + LN_EPS).sqrt();
        let nhat = centered * is;
        let mut tn = tu;
        for mut col in tn.column_iter_mut() {
            let m1 = col.sum() / nf;
            let m2 = col.dot(&nhat) / nf;
            for (v, &q) in col.iter_mut().zip(nhat.iter()) {
                *v = is * (*v - m1 - q * m2);
            }
        }
        for (r, g) in blk.gamma.iter().enumerate() {
            tn.row_mut(r).scale_mut(*g);
        }
        h = nhat.component_mul(&blk.gamma) + &blk.beta;
        t = tn;
    }
    let y = &p.w_out * &h + &p.b_out;
    let ty = &p.w_out * &t;
    (y, ty)
}
