// SPDX-License-Identifier: Apache-2.0

//! Two-layer graph convolutional regressor with sum pooling.
//!
//! `H1 = relu(A X W1 + b1)`, `H2 = relu(A H1 W2 + b2)`,
//! `y = sum_rows(H2) . w_out + b_out`, where `A = D^-1/2 (A + I) D^-1/2`.
//! Targets are standardized; `y` is de-standardized on output.

use std::collections::BTreeSet;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LearnError;

pub const HIDDEN1: usize = 10;
pub const HIDDEN2: usize = 70;

/// Node features plus normalized adjacency in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphTensors {
    pub n: usize,
    pub in_dim: usize,
    /// Row-major `n x in_dim`.
    pub x: Vec<f64>,
    pub row_ptr: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
}

impl GraphTensors {
    /// Build from node features and (directed or undirected) edges; the
    /// adjacency is symmetrized, deduplicated and given self loops.
    pub fn new(x: Vec<Vec<f64>>, edges: &[(u32, u32)]) -> Result<Self, LearnError> {
        let n = x.len();
        let in_dim = x.first().map_or(0, Vec::len);
        if x.iter().any(|r| r.len() != in_dim) {
            return Err(LearnError::DimensionMismatch {
                expected: in_dim,
                got: x.iter().map(Vec::len).find(|&l| l != in_dim).unwrap_or(0),
            });
        }
        let mut nbrs: Vec<BTreeSet<u32>> = (0..n as u32).map(|i| BTreeSet::from([i])).collect();
        for &(a, b) in edges {
            if a as usize >= n || b as usize >= n {
                return Err(LearnError::Malformed(format!("edge ({a}, {b}) out of range")));
            }
            nbrs[a as usize].insert(b);
            nbrs[b as usize].insert(a);
        }
        let inv_sqrt: Vec<f64> = nbrs.iter().map(|s| 1.0 / (s.len() as f64).sqrt()).collect();
        let mut row_ptr = vec![0];
        let mut col = Vec::new();
        let mut val = Vec::new();
        for (i, s) in nbrs.iter().enumerate() {
            for &j in s {
                col.push(j);
                val.push(inv_sqrt[i] * inv_sqrt[j as usize]);
            }
            row_ptr.push(col.len());
        }
        Ok(GraphTensors {
            n,
            in_dim,
            x: x.into_iter().flatten().collect(),
            row_ptr,
            col,
            val,
        })
    }

    /// `A * m` for a row-major `n x k` matrix. Each output sums its terms in
    /// sorted order, so node relabeling does not change the result bits.
    fn propagate(&self, m: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n * k];
        let mut terms = Vec::new();
        for i in 0..self.n {
            let edges = self.row_ptr[i]..self.row_ptr[i + 1];
            for c in 0..k {
                terms.clear();
                terms.extend(
                    edges
                        .clone()
                        .map(|e| self.val[e] * m[self.col[e] as usize * k + c]),
                );
                out[i * k + c] = ordered_sum(&mut terms);
            }
        }
        out
    }
}

fn ordered_sum(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    v.iter().sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    pub in_dim: usize,
    /// Row-major `in_dim x 10`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `10 x 70`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
    pub target_mean: f64,
    pub target_std: f64,
    /// Fixed multiplier on the pooled column sums (not trained).
    pub pool_scale: f64,
    /// Fixed offset subtracted from the scaled sums (not trained).
    pub pool_center: Vec<f64>,
}

/// `a (r x k) * b (k x c)`, row-major.
fn matmul(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let dst = &mut out[i * c..(i + 1) * c];
        for t in 0..k {
            let s = a[i * k + t];
            if s == 0.0 {
                continue;
            }
            for (o, &w) in dst.iter_mut().zip(&b[t * c..(t + 1) * c]) {
                *o += s * w;
            }
        }
    }
    out
}

/// `a^T (k x r) * b (r x c)` where `a` is `r x k`.
fn matmul_tn(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * c];
    for i in 0..r {
        let brow = &b[i * c..(i + 1) * c];
        for t in 0..k {
            let s = a[i * k + t];
            if s == 0.0 {
                continue;
            }
            for (o, &w) in out[t * c..(t + 1) * c].iter_mut().zip(brow) {
                *o += s * w;
            }
        }
    }
    out
}

/// `a (r x c) * b^T` where `b` is `k x c`.
fn matmul_nt(a: &[f64], b: &[f64], r: usize, c: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * k];
    for i in 0..r {
        let arow = &a[i * c..(i + 1) * c];
        for t in 0..k {
            out[i * k + t] = arow.iter().zip(&b[t * c..(t + 1) * c]).map(|(x, y)| x * y).sum();
        }
    }
    out
}

fn add_bias_relu(z: &mut [f64], b: &[f64]) -> Vec<f64> {
    let k = b.len();
    for row in z.chunks_mut(k) {
        for (v, &bb) in row.iter_mut().zip(b) {
            *v += bb;
        }
    }
    z.iter().map(|&v| v.max(0.0)).collect()
}

/// Forward intermediates kept for backprop.
struct Forward {
    ax: Vec<f64>,
    z1: Vec<f64>,
    ah1: Vec<f64>,
    z2: Vec<f64>,
    pooled: Vec<f64>,
    y_norm: f64,
}

/// Flat gradient in parameter order w1, b1, w2, b2, w_out, b_out.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl GcnModel {
    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len() + self.w_out.len() + 1
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(in_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |fan_in: usize, fan_out: usize| -> Vec<f64> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..limit))
                .collect()
        };
        GcnModel {
            in_dim,
            w1: glorot(in_dim, HIDDEN1),
            b1: vec![0.0; HIDDEN1],
            w2: glorot(HIDDEN1, HIDDEN2),
            b2: vec![0.0; HIDDEN2],
            w_out: glorot(HIDDEN2, 1),
            b_out: 0.0,
            target_mean: 0.0,
            target_std: 1.0,
            pool_scale: 1.0,
            pool_center: vec![0.0; HIDDEN2],
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend(&self.w1);
        v.extend(&self.b1);
        v.extend(&self.w2);
        v.extend(&self.b2);
        v.extend(&self.w_out);
        v.push(self.b_out);
        v
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut at = 0;
        for dst in [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w_out,
        ] {
            let len = dst.len();
            dst.copy_from_slice(&p[at..at + len]);
            at += len;
        }
        self.b_out = p[at];
    }

    fn check(&self, g: &GraphTensors) -> Result<(), LearnError> {
        if g.in_dim != self.in_dim && g.n > 0 {
            return Err(LearnError::DimensionMismatch {
                expected: self.in_dim,
                got: g.in_dim,
            });
        }
        Ok(())
    }

    fn forward_cached(&self, g: &GraphTensors, ax: Option<&[f64]>) -> Forward {
        let ax = ax.map_or_else(|| g.propagate(&g.x, self.in_dim), <[f64]>::to_vec);
        let mut z1 = matmul(&ax, &self.w1, g.n, self.in_dim, HIDDEN1);
        let h1 = add_bias_relu(&mut z1, &self.b1);
        let ah1 = g.propagate(&h1, HIDDEN1);
        let mut z2 = matmul(&ah1, &self.w2, g.n, HIDDEN1, HIDDEN2);
        let h2 = add_bias_relu(&mut z2, &self.b2);
        let mut column = Vec::with_capacity(g.n);
        let pooled: Vec<f64> = (0..HIDDEN2)
            .map(|k| {
                column.clear();
                column.extend(h2.iter().skip(k).step_by(HIDDEN2));
                ordered_sum(&mut column) * self.pool_scale - self.pool_center[k]
            })
            .collect();
        let y_norm = pooled.iter().zip(&self.w_out).map(|(a, b)| a * b).sum::<f64>() + self.b_out;
        Forward {
            ax,
            z1,
            ah1,
            z2,
            pooled,
            y_norm,
        }
    }

    /// Standardized-space output.
    pub fn forward_norm(&self, g: &GraphTensors) -> Result<f64, LearnError> {
        self.check(g)?;
        Ok(self.forward_cached(g, None).y_norm)
    }

    pub fn predict(&self, g: &GraphTensors) -> Result<f64, LearnError> {
        Ok(self.forward_norm(g)? * self.target_std + self.target_mean)
    }

    /// Gradient of `scale * (y_norm - t_norm)^2` for one graph.
    fn backward(&self, g: &GraphTensors, ax: Option<&[f64]>, t_norm: f64, scale: f64, flip_w2: bool) -> (f64, Gradient) {
        let f = self.forward_cached(g, ax);
        let err = f.y_norm - t_norm;
        let dy = 2.0 * scale * err;
        let d_wout: Vec<f64> = f.pooled.iter().map(|&p| dy * p).collect();
        let d_bout = dy;
        // dZ2 = (dy * w_out) masked by relu
        let mut dz2 = vec![0.0; g.n * HIDDEN2];
        for (i, row) in dz2.chunks_mut(HIDDEN2).enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                if f.z2[i * HIDDEN2 + k] > 0.0 {
                    *v = dy * self.w_out[k] * self.pool_scale;
                }
            }
        }
        let mut d_w2 = matmul_tn(&f.ah1, &dz2, g.n, HIDDEN1, HIDDEN2);
        if flip_w2 {
            d_w2.iter_mut().for_each(|v| *v = -*v);
        }
        let mut d_b2 = vec![0.0; HIDDEN2];
        for row in dz2.chunks(HIDDEN2) {
            for (b, &v) in d_b2.iter_mut().zip(row) {
                *b += v;
            }
        }
        let d_ah1 = matmul_nt(&dz2, &self.w2, g.n, HIDDEN2, HIDDEN1);
        // A is symmetric
        let mut dz1 = g.propagate(&d_ah1, HIDDEN1);
        for (v, &z) in dz1.iter_mut().zip(&f.z1) {
            if z <= 0.0 {
                *v = 0.0;
            }
        }
        let d_w1 = matmul_tn(&f.ax, &dz1, g.n, self.in_dim, HIDDEN1);
        let mut d_b1 = vec![0.0; HIDDEN1];
        for row in dz1.chunks(HIDDEN1) {
            for (b, &v) in d_b1.iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut grad = d_w1;
        grad.extend(d_b1);
        grad.extend(d_w2);
        grad.extend(d_b2);
        grad.extend(d_wout);
        grad.push(d_bout);
        (scale * err * err, Gradient(grad))
    }

    /// Loss `(y_norm - t_norm)^2` for a single graph with raw target `target`.
    pub fn loss(&self, g: &GraphTensors, target: f64) -> Result<f64, LearnError> {
        let t = (target - self.target_mean) / self.target_std;
        Ok((self.forward_norm(g)? - t).powi(2))
    }

    /// Analytic gradient of [`Self::loss`].
    pub fn gradient(&self, g: &GraphTensors, target: f64) -> Result<Gradient, LearnError> {
        self.check(g)?;
        let t = (target - self.target_mean) / self.target_std;
        Ok(self.backward(g, None, t, 1.0, false).1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for GcnParams {
    fn default() -> Self {
        GcnParams {
            learning_rate: 0.01,
            epochs: 100,
            seed: 0,
        }
    }
}

pub const STD_FLOOR: f64 = 1e-12;

/// Full-batch Adam on the mean squared error of standardized targets.
/// Returns the model and the loss before each epoch's update, plus the final loss.
pub fn gcn_train(
    data: &[(GraphTensors, f64)],
    params: &GcnParams,
) -> Result<(GcnModel, Vec<f64>), LearnError> {
    if data.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let in_dim = data.iter().find(|(g, _)| g.n > 0).map_or(0, |(g, _)| g.in_dim);
    if data.iter().any(|(_, t)| !t.is_finite()) {
        return Err(LearnError::Malformed("non-finite GCN target".into()));
    }
    let mut model = GcnModel::init(in_dim, params.seed);
    // keeps the pooled sums O(1) whatever the graph sizes
    let mean_nodes = data.iter().map(|(g, _)| g.n).sum::<usize>() as f64 / data.len() as f64;
    model.pool_scale = 1.0 / mean_nodes.max(1.0);
    for (g, _) in data {
        model.check(g)?;
    }
    let n = data.len() as f64;
    let mean = data.iter().map(|(_, t)| t).sum::<f64>() / n;
    let var = data.iter().map(|(_, t)| (t - mean).powi(2)).sum::<f64>() / n;
    let mut std = var.sqrt();
    if std < STD_FLOOR {
        warn!("GCN targets have zero variance; using std {STD_FLOOR}");
        std = STD_FLOOR;
    }
    model.target_mean = mean;
    model.target_std = std;
    let targets: Vec<f64> = data.iter().map(|(_, t)| (t - mean) / std).collect();
    let ax: Vec<Vec<f64>> = data
        .par_iter()
        .map(|(g, _)| g.propagate(&g.x, in_dim))
        .collect();

    // centre the readout on the initial mean embedding so the output bias
    // does not have to travel to cancel it
    let pooled: Vec<Vec<f64>> = data
        .par_iter()
        .zip(&ax)
        .map(|((g, _), ax)| model.forward_cached(g, Some(ax)).pooled)
        .collect();
    for k in 0..HIDDEN2 {
        let mut column: Vec<f64> = pooled.iter().map(|p| p[k]).collect();
        model.pool_center[k] = ordered_sum(&mut column) / n;
    }

    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut p = model.params();
    let mut m = vec![0.0; p.len()];
    let mut v = vec![0.0; p.len()];
    let mut trace = Vec::with_capacity(params.epochs + 1);
    let batch = |model: &GcnModel| -> (f64, Vec<f64>) {
        let parts: Vec<(f64, Gradient)> = data
            .par_iter()
            .zip(&ax)
            .zip(&targets)
            .map(|(((g, _), ax), &t)| model.backward(g, Some(ax), t, 1.0 / n, false))
            .collect();
        let mut grad = vec![0.0; model.n_params()];
        let mut loss = 0.0;
        for (l, Gradient(gr)) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(gr) {
                *a += b;
            }
        }
        (loss, grad)
    };
    for epoch in 1..=params.epochs {
        let (loss, grad) = batch(&model);
        trace.push(loss);
        let c1 = 1.0 - f64::powi(b1, epoch as i32);
        let c2 = 1.0 - f64::powi(b2, epoch as i32);
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            p[i] -= params.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
        }
        model.set_params(&p);
    }
    trace.push(batch(&model).0);
    Ok((model, trace))
}

/// Largest relative error between the analytic gradient and central finite
/// differences (`h = 1e-5`) over `n_samples` parameters (all if larger than
/// the parameter count), sampled with `seed`.
pub fn gcn_gradcheck(
    model: &GcnModel,
    g: &GraphTensors,
    target: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64, LearnError> {
    let grad = model.gradient(g, target)?;
    gradcheck_against(model, g, target, &grad, n_samples, seed)
}

fn gradcheck_against(
    model: &GcnModel,
    g: &GraphTensors,
    target: f64,
    grad: &Gradient,
    n_samples: usize,
    seed: u64,
) -> Result<f64, LearnError> {
    let h = 1e-5;
    let base = model.params();
    let total = base.len();
    let idx: Vec<usize> = if n_samples >= total {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = rand::seq::index::sample(&mut rng, total, n_samples).into_vec();
        v.sort_unstable();
        v
    };
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for i in idx {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params(&p);
        let up = probe.loss(g, target)?;
        p[i] = base[i] - h;
        probe.set_params(&p);
        let down = probe.loss(g, target)?;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grad.0[i];
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
