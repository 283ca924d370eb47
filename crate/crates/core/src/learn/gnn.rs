//! Permutation-equivariant GNN producing the power split `(p, ζ)` of the
//! structured beamformer.
//!
//! One update layer: input layer `f_in: R^{4M+6} → R^{6M}`, aggregation
//! `f_agg: R^{6M} → R^{3M}` applied to the element-wise max over the other
//! users, combination `f_com: R^{9M} → R^{3M}` and a linear output layer
//! `f_out: R^{3M} → R^2` followed by a softmax across users.

use rand::Rng;

use crate::linalg::CVec;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim × in_dim`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn xavier<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weight = (0..in_dim * out_dim)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit)
            .collect();
        Dense {
            in_dim,
            out_dim,
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        self.weight
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    fn write(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weight);
        out.extend_from_slice(&self.bias);
    }

    fn read(&mut self, src: &[f64]) -> usize {
        let nw = self.weight.len();
        self.weight.copy_from_slice(&src[..nw]);
        self.bias.copy_from_slice(&src[nw..nw + self.out_dim]);
        nw + self.out_dim
    }
}

fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnParams {
    pub m: usize,
    pub f_in: Dense,
    pub f_agg: Dense,
    pub f_com: Dense,
    pub f_out: Dense,
}

impl GnnParams {
    pub fn input_dim(m: usize) -> usize {
        4 * m + 6
    }

    /// `69M² + 54M + 2`.
    pub fn param_count(m: usize) -> usize {
        69 * m * m + 54 * m + 2
    }

    pub fn zeros(m: usize) -> Self {
        GnnParams {
            m,
            f_in: Dense::zeros(4 * m + 6, 6 * m),
            f_agg: Dense::zeros(6 * m, 3 * m),
            f_com: Dense::zeros(9 * m, 3 * m),
            f_out: Dense::zeros(3 * m, 2),
        }
    }

    /// Glorot-uniform hidden layers and a zero output layer, so a fresh
    /// network outputs the uniform split `p_k = ζ_k = P_T / K`.
    pub fn init<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        GnnParams {
            m,
            f_in: Dense::xavier(4 * m + 6, 6 * m, rng),
            f_agg: Dense::xavier(6 * m, 3 * m, rng),
            f_com: Dense::xavier(9 * m, 3 * m, rng),
            f_out: Dense::zeros(3 * m, 2),
        }
    }

    pub fn len(&self) -> usize {
        self.f_in.len() + self.f_agg.len() + self.f_com.len() + self.f_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for layer in [&self.f_in, &self.f_agg, &self.f_com, &self.f_out] {
            layer.write(out);
        }
    }

    /// Reads parameters in [`write_flat`](Self::write_flat) order; returns
    /// the number consumed.
    pub fn read_flat(&mut self, src: &[f64]) -> Result<usize> {
        if src.len() < self.len() {
            return Err(Error::Dimension(format!("GNN needs {} values, got {}", self.len(), src.len())));
        }
        let mut at = 0;
        for layer in [&mut self.f_in, &mut self.f_agg, &mut self.f_com, &mut self.f_out] {
            at += layer.read(&src[at..]);
        }
        Ok(at)
    }
}

/// Per-user network input `[Re(s̃); Im(s̃)]` with
/// `s̃ = {h_d,k, θᴴH_r,k, u_k, λ_k, α_k}`.
///
/// Channel entries are scaled by `√P_T / σ`, receive gains by `σ`, and `λ_k`
/// enters as `ln λ_k`, so features are dimensionless and O(1) across
/// scenarios. `λ_k` and `α_k` are real and contribute zero imaginary parts.
pub fn gnn_features(h_d: &[CVec], h_ris: &[CVec], u: &[C64], lambda: &[f64], alpha: &[f64], sigma2: f64, pt: f64) -> Vec<Vec<f64>> {
    let ch = (pt / sigma2).sqrt();
    let us = sigma2.sqrt();
    (0..h_d.len())
        .map(|k| {
            let mut re = Vec::with_capacity(4 * h_d[k].len() + 6);
            let mut im = Vec::with_capacity(2 * h_d[k].len() + 3);
            for z in h_d[k].iter().chain(h_ris[k].iter()) {
                re.push(z.re * ch);
                im.push(z.im * ch);
            }
            re.push(u[k].re * us);
            im.push(u[k].im * us);
            re.push(lambda[k].max(f64::MIN_POSITIVE).ln());
            im.push(0.0);
            re.push(alpha[k]);
            im.push(0.0);
            re.extend(im);
            re
        })
        .collect()
}

/// Order-independent softmax scaled to `total`: the normaliser is summed in
/// sorted order so permuting the inputs permutes the outputs bit-for-bit.
fn softmax_scaled(logits: &[f64], total: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let mut sorted = exps.clone();
    sorted.sort_by(f64::total_cmp);
    let sum: f64 = sorted.iter().sum();
    exps.iter().map(|e| e / sum * total).collect()
}

/// Forward pass: per-user inputs to `(p, ζ)`, each summing to `pt`.
pub fn gnn_forward(params: &GnnParams, inputs: &[Vec<f64>], pt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = GnnParams::input_dim(params.m);
    if let Some(bad) = inputs.iter().find(|v| v.len() != dim) {
        return Err(Error::Dimension(format!("GNN input of length {} (expected {dim})", bad.len())));
    }
    if inputs.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let s0: Vec<Vec<f64>> = inputs.iter().map(|x| relu(params.f_in.forward(x))).collect();
    let k = s0.len();
    let mut out0 = Vec::with_capacity(k);
    let mut out1 = Vec::with_capacity(k);
    for i in 0..k {
        let agg = if k < 2 {
            vec![0.0; params.f_agg.out_dim]
        } else {
            let mut pooled = vec![f64::NEG_INFINITY; s0[i].len()];
            for (j, s) in s0.iter().enumerate() {
                if j != i {
                    for (p, v) in pooled.iter_mut().zip(s) {
                        *p = p.max(*v);
                    }
                }
            }
            relu(params.f_agg.forward(&pooled))
        };
        let mut joint = s0[i].clone();
        joint.extend(agg);
        let s1 = relu(params.f_com.forward(&joint));
        let s2 = params.f_out.forward(&s1);
        out0.push(s2[0]);
        out1.push(s2[1]);
    }
    Ok((softmax_scaled(&out0, pt), softmax_scaled(&out1, pt)))
}
