//! Two-layer logistic networks with output truncation.
//!
//! The function class is
//!
//! ```text
//! h(x) = Σ_{i=1}^{M} μᵢ σ( Σ_{j=1}^{4r} λ_{i,j} σ(θ_{i,j}·x + θ_{i,j,0}) + λ_{i,0} ) + μ₀
//! ```
//!
//! with the logistic σ at both layers, M outer units and 4r inner units per
//! outer unit (r is the interaction order; the experiments use r = 1,
//! M = 32). Model output passes through the truncation operator
//! T_β(h) = sign(h)·min(|h|, β), and training minimizes squared loss of the
//! truncated output by Adam, with the exact clamp subgradient (zero in the
//! truncated region).

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::RandomStream;

/// Architecture sizes: M outer units, order r (4r inner units per outer
/// unit), and the input dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnnDims {
    pub outer_units: usize,
    pub order: usize,
    pub input_dim: usize,
}

impl FnnDims {
    pub fn inner_units(&self) -> usize {
        4 * self.order
    }

    fn param_count(&self) -> usize {
        let (m_out, m_in, m) = (self.outer_units, self.inner_units(), self.input_dim);
        (m_out + 1) + m_out * (m_in + 1) + m_out * m_in * (m + 1)
    }
}

/// Weights of one trained network plus its truncation level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FnnModel {
    pub dims: FnnDims,
    /// Output weights μ₀..μ_M (index 0 is the bias μ₀).
    pub mu: Vec<f64>,
    /// Hidden-combination weights, row i = [λ_{i,0}, λ_{i,1}, …, λ_{i,4r}].
    pub lambda: Vec<f64>,
    /// Input weights, block (i,j) = [θ_{i,j,0}, θ_{i,j,1}, …, θ_{i,j,m}].
    pub theta: Vec<f64>,
    /// Truncation level β applied to the output.
    pub beta_trunc: f64,
}

impl FnnModel {
    /// The all-zero model: h ≡ 0 regardless of input.
    pub fn zero(dims: FnnDims, beta_trunc: f64) -> Self {
        FnnModel {
            dims,
            mu: vec![0.0; dims.outer_units + 1],
            lambda: vec![0.0; dims.outer_units * (dims.inner_units() + 1)],
            theta: vec![0.0; dims.outer_units * dims.inner_units() * (dims.input_dim + 1)],
            beta_trunc,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::config(format!("bad model JSON: {e}")))
    }

    /// Weights in flat (μ, λ, θ) parameter order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.dims.param_count());
        p.extend_from_slice(&self.mu);
        p.extend_from_slice(&self.lambda);
        p.extend_from_slice(&self.theta);
        p
    }

    fn from_flat(dims: FnnDims, beta_trunc: f64, params: &[f64]) -> Self {
        let n_mu = dims.outer_units + 1;
        let n_lambda = dims.outer_units * (dims.inner_units() + 1);
        FnnModel {
            dims,
            mu: params[..n_mu].to_vec(),
            lambda: params[n_mu..n_mu + n_lambda].to_vec(),
            theta: params[n_mu + n_lambda..].to_vec(),
            beta_trunc,
        }
    }
}

/// Truncation operator T_β: clamp to [-β, β] preserving sign.
pub fn truncate(h: f64, beta: f64) -> f64 {
    h.abs().min(beta) * h.signum()
}

/// Default truncation level (log n)·√(log(d̃·n)) for full sample size n and
/// d̃ = max(p, q, m).
pub fn default_beta_trunc(n: usize, d_max: usize) -> f64 {
    let nf = n as f64;
    nf.ln() * ((d_max as f64 * nf).ln()).sqrt()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Truncated forward pass T_β(h(x)).
pub fn forward(model: &FnnModel, x: &[f64]) -> f64 {
    truncate(forward_raw(model, x), model.beta_trunc)
}

/// Untruncated forward pass h(x).
pub fn forward_raw(model: &FnnModel, x: &[f64]) -> f64 {
    let dims = model.dims;
    let m_in = dims.inner_units();
    let m = dims.input_dim;
    debug_assert_eq!(x.len(), m);

    let mut h = model.mu[0];
    for i in 0..dims.outer_units {
        let lam = &model.lambda[i * (m_in + 1)..(i + 1) * (m_in + 1)];
        let mut b = lam[0];
        for j in 0..m_in {
            let th = &model.theta[((i * m_in) + j) * (m + 1)..((i * m_in) + j + 1) * (m + 1)];
            let mut a = th[0];
            for (v, &xv) in x.iter().enumerate() {
                a += th[v + 1] * xv;
            }
            b += lam[j + 1] * sigmoid(a);
        }
        h += model.mu[i + 1] * sigmoid(b);
    }
    h
}

/// Training configuration for [`train`].
#[derive(Debug, Clone)]
pub struct FnnConfig {
    pub outer_units: usize,
    pub order: usize,
    pub beta_trunc: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Uniform init half-width is `init_scale`/√fan-in per layer.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for FnnConfig {
    fn default() -> Self {
        FnnConfig {
            outer_units: 32,
            order: 1,
            beta_trunc: f64::INFINITY,
            epochs: 500,
            learning_rate: 1e-3,
            batch_size: 32,
            init_scale: 1.0,
            seed: 0,
        }
    }
}

/// Squared loss of the truncated output over (inputs, targets), and its
/// gradient in flat parameter order (μ, λ, θ). `beta` of infinity evaluates
/// the untruncated objective.
///
/// Hot loops run across the sample axis so they vectorize; the batch is
/// transposed into column-major scratch buffers first.
pub fn loss_and_grad(
    dims: FnnDims,
    params: &[f64],
    beta: f64,
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView1<'_, f64>,
    grad: &mut [f64],
) -> f64 {
    let n = inputs.nrows();
    let m = dims.input_dim;
    let mut scratch = BatchScratch::new(dims, n);
    for (v, col) in scratch.x_cols.chunks_exact_mut(n).enumerate() {
        for (b, slot) in col.iter_mut().enumerate() {
            *slot = inputs[[b, v]];
        }
    }
    debug_assert_eq!(m * n, scratch.x_cols.len());
    batch_loss_grad(dims, params, beta, targets, &mut scratch, grad)
}

/// Column-major batch buffers reused across minibatches.
struct BatchScratch {
    capacity: usize,
    len: usize,
    /// m columns of length `len` (input values per coordinate).
    x_cols: Vec<f64>,
    /// One row of length `len` per inner unit: activations σ(a).
    inner_act: Vec<f64>,
    /// One row per outer unit: activations σ(b).
    outer_act: Vec<f64>,
    /// Per-sample output gradient, then reused for chained gradients.
    gh: Vec<f64>,
    gb: Vec<f64>,
    ga: Vec<f64>,
    h: Vec<f64>,
}

impl BatchScratch {
    fn new(dims: FnnDims, len: usize) -> Self {
        let mut s = BatchScratch {
            capacity: 0,
            len: 0,
            x_cols: Vec::new(),
            inner_act: Vec::new(),
            outer_act: Vec::new(),
            gh: Vec::new(),
            gb: Vec::new(),
            ga: Vec::new(),
            h: Vec::new(),
        };
        s.reserve(dims, len);
        s
    }

    fn reserve(&mut self, dims: FnnDims, len: usize) {
        if len > self.capacity {
            self.capacity = len;
            self.x_cols = vec![0.0; dims.input_dim * len];
            self.inner_act = vec![0.0; dims.outer_units * dims.inner_units() * len];
            self.outer_act = vec![0.0; dims.outer_units * len];
            self.gh = vec![0.0; len];
            self.gb = vec![0.0; len];
            self.ga = vec![0.0; len];
            self.h = vec![0.0; len];
        }
        self.len = len;
    }
}

fn batch_loss_grad(
    dims: FnnDims,
    params: &[f64],
    beta: f64,
    targets: ArrayView1<'_, f64>,
    scratch: &mut BatchScratch,
    grad: &mut [f64],
) -> f64 {
    let n = scratch.len;
    let m = dims.input_dim;
    let m_in = dims.inner_units();
    let m_out = dims.outer_units;
    let n_mu = m_out + 1;
    let n_lambda = m_out * (m_in + 1);
    let (mu, rest) = params.split_at(n_mu);
    let (lambda, theta) = rest.split_at(n_lambda);
    let (g_mu, g_rest) = grad.split_at_mut(n_mu);
    let (g_lambda, g_theta) = g_rest.split_at_mut(n_lambda);
    g_mu.iter_mut().for_each(|g| *g = 0.0);
    g_lambda.iter_mut().for_each(|g| *g = 0.0);
    g_theta.iter_mut().for_each(|g| *g = 0.0);
    let inv_n = 1.0 / n as f64;

    // Forward: inner layer per unit u = (i,j), across the batch.
    for u in 0..m_out * m_in {
        let th = &theta[u * (m + 1)..(u + 1) * (m + 1)];
        let act = &mut scratch.inner_act[u * n..u * n + n];
        act.iter_mut().for_each(|a| *a = th[0]);
        for (v, &w) in th[1..].iter().enumerate() {
            let col = &scratch.x_cols[v * n..v * n + n];
            for (a, &x) in act.iter_mut().zip(col) {
                *a += w * x;
            }
        }
        act.iter_mut().for_each(|a| *a = sigmoid(*a));
    }

    // Outer layer and output.
    scratch.h.iter_mut().take(n).for_each(|h| *h = mu[0]);
    for i in 0..m_out {
        let lam = &lambda[i * (m_in + 1)..(i + 1) * (m_in + 1)];
        let act = &mut scratch.outer_act[i * n..i * n + n];
        act.iter_mut().for_each(|b| *b = lam[0]);
        for (j, &w) in lam[1..].iter().enumerate() {
            let s_row = &scratch.inner_act[(i * m_in + j) * n..(i * m_in + j) * n + n];
            for (b, &s) in act.iter_mut().zip(s_row) {
                *b += w * s;
            }
        }
        act.iter_mut().for_each(|b| *b = sigmoid(*b));
        let w = mu[i + 1];
        for (h, &t) in scratch.h.iter_mut().zip(act.iter()) {
            *h += w * t;
        }
    }

    // Loss and output gradient with the clamp subgradient.
    let mut loss = 0.0;
    for b in 0..n {
        let h = scratch.h[b];
        let out = truncate(h, beta);
        let err = out - targets[b];
        loss += err * err * inv_n;
        scratch.gh[b] = if h.abs() > beta { 0.0 } else { 2.0 * err * inv_n };
    }

    // Backward.
    g_mu[0] = scratch.gh.iter().take(n).sum();
    for i in 0..m_out {
        let t_row = &scratch.outer_act[i * n..i * n + n];
        let gh = &scratch.gh[..n];
        g_mu[i + 1] = gh.iter().zip(t_row).map(|(&g, &t)| g * t).sum();

        let w_mu = mu[i + 1];
        for ((gb, &g), &t) in scratch.gb.iter_mut().zip(gh).zip(t_row) {
            *gb = g * w_mu * t * (1.0 - t);
        }
        let gb = &scratch.gb[..n];
        let lam = &lambda[i * (m_in + 1)..(i + 1) * (m_in + 1)];
        let gl = &mut g_lambda[i * (m_in + 1)..(i + 1) * (m_in + 1)];
        gl[0] = gb.iter().sum();
        for j in 0..m_in {
            let u = i * m_in + j;
            let s_row = &scratch.inner_act[u * n..u * n + n];
            gl[j + 1] = gb.iter().zip(s_row).map(|(&g, &s)| g * s).sum();

            let w_lam = lam[j + 1];
            for ((ga, &g), &s) in scratch.ga.iter_mut().zip(gb).zip(s_row) {
                *ga = g * w_lam * s * (1.0 - s);
            }
            let ga = &scratch.ga[..n];
            let gt = &mut g_theta[u * (m + 1)..(u + 1) * (m + 1)];
            gt[0] = ga.iter().sum();
            for v in 0..m {
                let col = &scratch.x_cols[v * n..v * n + n];
                gt[v + 1] = ga.iter().zip(col).map(|(&g, &x)| g * x).sum();
            }
        }
    }
    loss
}

/// Trains one network on (inputs, targets) by Adam over minibatches.
/// Deterministic given `config.seed`.
pub fn train(
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView1<'_, f64>,
    config: &FnnConfig,
) -> Result<FnnModel> {
    let n = inputs.nrows();
    if n < 2 {
        return Err(Error::shape(format!("training needs at least 2 rows, got {n}")));
    }
    if targets.len() != n {
        return Err(Error::shape(format!(
            "targets have {} entries for {} rows",
            targets.len(),
            n
        )));
    }
    let dims = FnnDims {
        outer_units: config.outer_units,
        order: config.order,
        input_dim: inputs.ncols(),
    };

    let mut stream = RandomStream::new(config.seed, 0);
    let mut params = init_params(dims, config.init_scale, &mut stream);
    let mut grad = vec![0.0; params.len()];

    // Adam state.
    let (b1, b2, eps_adam): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m1 = vec![0.0; params.len()];
    let mut m2 = vec![0.0; params.len()];
    let mut step = 0usize;

    let batch = config.batch_size.max(1).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut scratch = BatchScratch::new(dims, batch);
    let mut batch_y = ndarray::Array1::zeros(batch);

    for epoch in 0..config.epochs {
        // Seeded in-place shuffle; one stream across epochs.
        for i in (1..n).rev() {
            let j = (stream.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut start = 0;
        while start < n {
            let end = (start + batch).min(n);
            let rows = &order[start..end];
            let width = rows.len();
            scratch.reserve(dims, width);
            for v in 0..dims.input_dim {
                let col = &mut scratch.x_cols[v * width..(v + 1) * width];
                for (r, &row) in rows.iter().enumerate() {
                    col[r] = inputs[[row, v]];
                }
            }
            for (r, &row) in rows.iter().enumerate() {
                batch_y[r] = targets[row];
            }
            let loss = batch_loss_grad(
                dims,
                &params,
                config.beta_trunc,
                batch_y.slice(ndarray::s![..width]),
                &mut scratch,
                &mut grad,
            );
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss += loss * width as f64;

            step += 1;
            let bc1 = 1.0 - b1.powi(step as i32);
            let bc2 = 1.0 - b2.powi(step as i32);
            for k in 0..params.len() {
                m1[k] = b1 * m1[k] + (1.0 - b1) * grad[k];
                m2[k] = b2 * m2[k] + (1.0 - b2) * grad[k] * grad[k];
                let mhat = m1[k] / bc1;
                let vhat = m2[k] / bc2;
                params[k] -= config.learning_rate * mhat / (vhat.sqrt() + eps_adam);
            }
            start = end;
        }
        if !(epoch_loss / n as f64).is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
    }

    Ok(FnnModel::from_flat(dims, config.beta_trunc, &params))
}

/// Mean squared error of the truncated model on a dataset.
pub fn mse(model: &FnnModel, inputs: ArrayView2<'_, f64>, targets: ArrayView1<'_, f64>) -> f64 {
    let n = inputs.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        let row: Vec<f64> = inputs.row(i).to_vec();
        let e = forward(model, &row) - targets[i];
        acc += e * e;
    }
    acc / n as f64
}

fn init_params(dims: FnnDims, scale: f64, stream: &mut RandomStream) -> Vec<f64> {
    let m_in = dims.inner_units();
    let m_out = dims.outer_units;
    let mut params = Vec::with_capacity(dims.param_count());
    let uni = |stream: &mut RandomStream, half: f64| (stream.uniform01() * 2.0 - 1.0) * half;

    let half_mu = scale / (m_out as f64).sqrt();
    for _ in 0..=m_out {
        params.push(uni(stream, half_mu));
    }
    let half_lambda = scale / (m_in as f64).sqrt();
    for _ in 0..m_out * (m_in + 1) {
        params.push(uni(stream, half_lambda));
    }
    let half_theta = scale / (dims.input_dim.max(1) as f64).sqrt();
    for _ in 0..m_out * m_in * (dims.input_dim + 1) {
        params.push(uni(stream, half_theta));
    }
    params
}
