//! Two-layer GCN `Z = Â relu(Â X W1) W2` with hand-derived gradients and Adam.
//!
//! Weight decay enters as `wd * W` in the gradient, i.e. an L2 penalty
//! `wd / 2 * (||W1||² + ||W2||²)` in the loss. Dropout is applied to the input
//! of each layer during training.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{accuracy, check_compatible, EvalConfig, EvalModel, EvalReport};
use crate::dataset::Dataset;
use crate::error::{CgcError, Result};
use crate::graph::{normalize, SparseOperator};
use crate::matrix::{CsrMatrix, DenseMatrix};
use crate::par::{self, Execution};
use crate::seed;
use crate::structure::CondensedGraph;

/// Features below this density are stored sparse.
pub const SPARSE_DENSITY: f64 = 0.1;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

impl Features {
    pub fn auto(m: &DenseMatrix) -> Self {
        let csr = CsrMatrix::from_dense(m);
        if csr.density() < SPARSE_DENSITY {
            Features::Sparse(csr)
        } else {
            Features::Dense(m.clone())
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Features::Dense(m) => m.rows(),
            Features::Sparse(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Features::Dense(m) => m.cols(),
            Features::Sparse(m) => m.cols(),
        }
    }

    fn matmul(&self, w: &DenseMatrix, exec: Execution) -> Result<DenseMatrix> {
        match self {
            Features::Dense(m) => m.matmul_with(w, exec),
            Features::Sparse(m) => m.matmul_dense(w, exec),
        }
    }

    /// `selfᵀ g`
    fn t_matmul(&self, g: &DenseMatrix, exec: Execution) -> Result<DenseMatrix> {
        match self {
            Features::Dense(m) => m.t_matmul_with(g, exec),
            Features::Sparse(m) => m.transpose().matmul_dense(g, exec),
        }
    }

    fn dropout<R: Rng>(&self, rate: f64, rng: &mut R) -> Features {
        let keep = 1.0 - rate;
        let mut drop = |v: f64| if rng.random::<f64>() < rate { 0.0 } else { v / keep };
        match self {
            Features::Dense(m) => {
                let data = m.as_slice().iter().map(|&v| drop(v)).collect();
                Features::Dense(DenseMatrix::from_vec(m.rows(), m.cols(), data).expect("finite"))
            }
            Features::Sparse(m) => Features::Sparse(m.with_values(m.values().iter().map(|&v| drop(v)).collect())),
        }
    }
}

/// A graph operator and node features for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct GcnInput<'a> {
    pub op: &'a SparseOperator,
    pub features: &'a Features,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
}

impl GcnParams {
    /// Glorot-uniform initialization.
    pub fn glorot<R: Rng>(d: usize, hidden: usize, c: usize, rng: &mut R) -> Self {
        let mut init = |r: usize, k: usize| {
            let a = (6.0 / (r + k) as f64).sqrt();
            DenseMatrix::from_fn(r, k, |_, _| rng.random_range(-a..a))
        };
        let w1 = init(d, hidden);
        let w2 = init(hidden, c);
        Self { w1, w2 }
    }

    pub fn sq_norm(&self) -> f64 {
        self.w1.frobenius_sq() + self.w2.frobenius_sq()
    }
}

pub fn forward(params: &GcnParams, input: GcnInput<'_>, exec: Execution) -> Result<DenseMatrix> {
    let a1 = input.op.apply(&input.features.matmul(&params.w1, exec)?, exec)?;
    let h = a1.map(|v| v.max(0.0));
    input.op.apply(&h.matmul_with(&params.w2, exec)?, exec)
}

/// Mean softmax cross-entropy over `rows` and its gradient w.r.t. the logits.
fn cross_entropy(logits: &DenseMatrix, labels: &[usize], rows: &[usize]) -> (f64, DenseMatrix) {
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    let inv = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for &i in rows {
        let z = logits.row(i);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - m).exp()).sum();
        loss += m + sum.ln() - z[labels[i]];
        let g = grad.row_mut(i);
        for (gj, zj) in g.iter_mut().zip(z) {
            *gj = (zj - m).exp() / sum * inv;
        }
        g[labels[i]] -= inv;
    }
    (loss * inv, grad)
}

struct Masks {
    input: Features,
    hidden: DenseMatrix,
}

fn loss_and_grad_impl(
    params: &GcnParams,
    input: GcnInput<'_>,
    labels: &[usize],
    rows: &[usize],
    weight_decay: f64,
    dropout: Option<(f64, &mut ChaCha8Rng)>,
    exec: Execution,
) -> Result<(f64, GcnParams)> {
    let masks = match dropout {
        Some((rate, rng)) if rate > 0.0 => {
            let x = input.features.dropout(rate, rng);
            let keep = 1.0 - rate;
            let n = input.op.num_nodes();
            let h = DenseMatrix::from_fn(n, params.w1.cols(), |_, _| {
                if rng.random::<f64>() < rate { 0.0 } else { 1.0 / keep }
            });
            Some(Masks { input: x, hidden: h })
        }
        _ => None,
    };
    let x = masks.as_ref().map_or(input.features, |m| &m.input);
    let a1 = input.op.apply(&x.matmul(&params.w1, exec)?, exec)?;
    let mut h = a1.map(|v| v.max(0.0));
    if let Some(Masks { hidden: mask, .. }) = &masks {
        for (v, m) in h.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *v *= m;
        }
    }
    let logits = input.op.apply(&h.matmul_with(&params.w2, exec)?, exec)?;
    let (ce, dz) = cross_entropy(&logits, labels, rows);
    let loss = ce + 0.5 * weight_decay * params.sq_norm();

    let dhw = input.op.apply(&dz, exec)?;
    let mut g2 = h.t_matmul_with(&dhw, exec)?;
    let mut dh = dhw.matmul_with(&params.w2.transpose(), exec)?;
    if let Some(Masks { hidden: mask, .. }) = &masks {
        for (v, m) in dh.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *v *= m;
        }
    }
    for (v, a) in dh.as_mut_slice().iter_mut().zip(a1.as_slice()) {
        if *a <= 0.0 {
            *v = 0.0;
        }
    }
    let dxw = input.op.apply(&dh, exec)?;
    let mut g1 = x.t_matmul(&dxw, exec)?;
    g1.axpy(weight_decay, &params.w1);
    g2.axpy(weight_decay, &params.w2);
    Ok((loss, GcnParams { w1: g1, w2: g2 }))
}

/// Loss (cross-entropy plus L2) and exact gradients without dropout.
pub fn loss_and_gradients(
    params: &GcnParams,
    input: GcnInput<'_>,
    labels: &[usize],
    rows: &[usize],
    weight_decay: f64,
) -> Result<(f64, GcnParams)> {
    loss_and_grad_impl(params, input, labels, rows, weight_decay, None, Execution::Sequential)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, lr: f64, params: &mut [&mut DenseMatrix], grads: &[&DenseMatrix]) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let mut k = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (w, &gw) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
                self.m[k] = ADAM_BETA1 * self.m[k] + (1.0 - ADAM_BETA1) * gw;
                self.v[k] = ADAM_BETA2 * self.v[k] + (1.0 - ADAM_BETA2) * gw * gw;
                let mhat = self.m[k] / c1;
                let vhat = self.v[k] / c2;
                *w -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
                k += 1;
            }
        }
    }
}

/// Nodes and labels the loss is computed on.
#[derive(Debug, Clone, Copy)]
pub struct TrainSet<'a> {
    pub input: GcnInput<'a>,
    pub labels: &'a [usize],
    pub rows: &'a [usize],
    pub num_classes: usize,
}

/// Graph used for model selection and testing.
#[derive(Debug, Clone, Copy)]
pub struct Monitor<'a> {
    pub input: GcnInput<'a>,
    pub labels: &'a [usize],
    pub val: &'a [usize],
    pub test: &'a [usize],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub params: GcnParams,
    /// Training loss per epoch.
    pub losses: Vec<f64>,
    /// `||W1||² + ||W2||²` after initialization and after each epoch.
    pub weight_norms: Vec<f64>,
    /// Epoch of the selected model (0 = untrained).
    pub best_epoch: usize,
    pub best_val: f64,
    pub test_at_best: f64,
    pub diverged: bool,
}

fn monitor_scores(params: &GcnParams, mon: &Monitor<'_>) -> Result<(f64, f64)> {
    let pred = forward(params, mon.input, Execution::Sequential)?.argmax_rows();
    let val = if mon.val.is_empty() { 0.0 } else { accuracy(&pred, mon.labels, mon.val) };
    Ok((val, accuracy(&pred, mon.labels, mon.test)))
}

/// Full-batch training. With a monitor, keeps the epoch with the best
/// validation accuracy (first one on ties) and reports its test accuracy.
pub fn fit_gcn(
    train: &TrainSet<'_>,
    monitor: Option<&Monitor<'_>>,
    cfg: &EvalConfig,
    seed_value: u64,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.rows.is_empty() {
        return Err(CgcError::InvalidArgument("GCN training needs at least one labeled node".into()));
    }
    let exec = Execution::Sequential;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_value);
    let mut params = GcnParams::glorot(train.input.features.cols(), cfg.hidden, train.num_classes, &mut rng);
    let mut adam = Adam::new(params.w1.as_slice().len() + params.w2.as_slice().len());
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut weight_norms = vec![params.sq_norm()];
    let (mut best_val, mut test_at_best) = match monitor {
        Some(m) => monitor_scores(&params, m)?,
        None => (f64::NAN, f64::NAN),
    };
    let mut best_epoch = 0;
    let mut best_params = params.clone();
    let mut diverged = false;
    for epoch in 1..=cfg.epochs {
        let (loss, grads) = loss_and_grad_impl(
            &params,
            train.input,
            train.labels,
            train.rows,
            cfg.weight_decay,
            Some((cfg.dropout, &mut rng)),
            exec,
        )?;
        if !loss.is_finite() || !grads.w1.is_finite() || !grads.w2.is_finite() {
            diverged = true;
            break;
        }
        losses.push(loss);
        adam.step(cfg.lr, &mut [&mut params.w1, &mut params.w2], &[&grads.w1, &grads.w2]);
        weight_norms.push(params.sq_norm());
        match monitor {
            Some(m) => {
                let (val, test) = monitor_scores(&params, m)?;
                if val > best_val {
                    best_val = val;
                    test_at_best = test;
                    best_epoch = epoch;
                    best_params = params.clone();
                }
            }
            None => {
                best_epoch = epoch;
                best_params = params.clone();
            }
        }
    }
    Ok(FitOutcome {
        params: best_params,
        losses,
        weight_norms,
        best_epoch,
        best_val,
        test_at_best,
        diverged,
    })
}

fn run_repeats(train: &TrainSet<'_>, monitor: &Monitor<'_>, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let stage = seed::derive_seed(cfg.seed, seed::stream::GCN);
    let runs = par::try_map_range(Execution::Parallel, cfg.repeats, |r| {
        let start = Instant::now();
        let out = fit_gcn(train, Some(monitor), cfg, seed::derive_seed(stage, r as u64))?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        if out.diverged {
            log::warn!("GCN repeat {r} diverged; excluded from the mean");
        }
        Ok::<_, CgcError>(((!out.diverged).then_some(out.test_at_best), ms))
    })?;
    Ok(EvalReport::from_runs(EvalModel::Gcn2, runs))
}

/// Trains on the condensed graph; selects and tests on the original graph.
pub fn train_gcn2(graph: &CondensedGraph, original: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    check_compatible(graph, original)?;
    let cond_op = graph.normalized()?;
    let cond_x = Features::Dense(graph.features.clone());
    let rows: Vec<usize> = (0..graph.num_nodes()).collect();
    let train = TrainSet {
        input: GcnInput { op: cond_op.operator(), features: &cond_x },
        labels: &graph.labels,
        rows: &rows,
        num_classes: graph.num_classes,
    };
    let orig_op = normalize(&original.adjacency)?;
    let orig_x = Features::auto(&original.features);
    let monitor = Monitor {
        input: GcnInput { op: orig_op.operator(), features: &orig_x },
        labels: original.labels.labels(),
        val: &original.val,
        test: &original.test,
    };
    run_repeats(&train, &monitor, cfg)
}

/// Trains on the original graph's training nodes.
pub fn train_gcn2_whole(original: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    let op = normalize(&original.adjacency)?;
    let x = Features::auto(&original.features);
    let input = GcnInput { op: op.operator(), features: &x };
    let train = TrainSet {
        input,
        labels: original.labels.labels(),
        rows: &original.train,
        num_classes: original.num_classes(),
    };
    let monitor = Monitor {
        input,
        labels: original.labels.labels(),
        val: &original.val,
        test: &original.test,
    };
    run_repeats(&train, &monitor, cfg)
}
