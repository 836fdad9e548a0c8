//! Closed-form linear probe over the propagation stack.
//!
//! The probe is fit on depth-averaged training embeddings. Its true-class
//! scores become per-(node, depth) confidences, and its per-class error rates
//! on `H(K)` drive augmentation sampling.

use nalgebra::DMatrix;

use crate::dataset::one_hot;
use crate::error::{CgcError, Result};
use crate::matrix::DenseMatrix;
use crate::propagation::PropagationStack;

#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    /// Probe weights `Ŵ` (d x c).
    pub weights: DenseMatrix,
    /// Depth-averaged training embeddings (N_train x d).
    pub mean_stack: DenseMatrix,
    /// Training node ids, ascending.
    pub train: Vec<usize>,
    pub train_labels: Vec<usize>,
    pub num_classes: usize,
    pub depth: usize,
    /// Row-major (N_train x (K+1)): `confidence[t * (K+1) + l]`.
    pub confidence: Vec<f64>,
    /// Misclassification rate per class before smoothing.
    pub raw_class_errors: Vec<f64>,
    /// `(e * n + 1) / (n + 2)` per class.
    pub class_errors: Vec<f64>,
}

impl Assessment {
    /// Confidence of the `t`-th training node at depth `l`.
    pub fn confidence_at(&self, t: usize, l: usize) -> f64 {
        self.confidence[t * (self.depth + 1) + l]
    }
}

/// Probe score at the true class, clamped to `[0, 1]`.
pub fn confidence_score(scores: &[f64], label: usize) -> f64 {
    scores[label].clamp(0.0, 1.0)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn min_norm_lstsq(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(CgcError::DimensionMismatch {
            context: "least squares rows",
            expected: a.rows(),
            actual: b.rows(),
        });
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(DenseMatrix::zeros(a.cols(), b.cols()));
    }
    let svd = a.to_nalgebra().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * (a.rows().max(a.cols()) as f64) * f64::EPSILON;
    let x: DMatrix<f64> = svd
        .solve(&b.to_nalgebra(), eps)
        .map_err(|e| CgcError::Numerical(format!("least squares: {e}")))?;
    let out = DenseMatrix::from_nalgebra(&x);
    if !out.is_finite() {
        return Err(CgcError::Numerical("least squares produced non-finite weights".into()));
    }
    Ok(out)
}

pub fn fit_probe(
    stack: &PropagationStack,
    labels: &[usize],
    num_classes: usize,
    train: &[usize],
) -> Result<Assessment> {
    if train.is_empty() {
        return Err(CgcError::InvalidArgument("probe needs training nodes".into()));
    }
    let n = stack.layer(0).rows();
    if labels.len() != n {
        return Err(CgcError::DimensionMismatch {
            context: "probe labels vs nodes",
            expected: n,
            actual: labels.len(),
        });
    }
    let mut train = train.to_vec();
    train.sort_unstable();
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let mut counts = vec![0usize; num_classes];
    for &y in &train_labels {
        counts[y] += 1;
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(CgcError::MissingClass { class });
    }

    let depth = stack.depth();
    let per_depth: Vec<DenseMatrix> = stack.layers().iter().map(|h| h.select_rows(&train)).collect();
    let mut mean_stack = DenseMatrix::zeros(train.len(), stack.layer(0).cols());
    for h in &per_depth {
        mean_stack.axpy(1.0, h);
    }
    let mean_stack = mean_stack.scale(1.0 / (depth + 1) as f64);
    let y = one_hot(&train_labels, num_classes);
    let weights = min_norm_lstsq(&mean_stack, &y)?;

    let mut confidence = vec![0.0; train.len() * (depth + 1)];
    let mut wrong = vec![0usize; num_classes];
    for (l, h) in per_depth.iter().enumerate() {
        let scores = h.matmul(&weights)?;
        for (t, &yt) in train_labels.iter().enumerate() {
            confidence[t * (depth + 1) + l] = confidence_score(scores.row(t), yt);
        }
        if l == depth {
            for (t, pred) in scores.argmax_rows().into_iter().enumerate() {
                if pred != train_labels[t] {
                    wrong[train_labels[t]] += 1;
                }
            }
        }
    }
    let raw_class_errors: Vec<f64> = wrong
        .iter()
        .zip(&counts)
        .map(|(&w, &c)| w as f64 / c as f64)
        .collect();
    let class_errors = raw_class_errors
        .iter()
        .zip(&counts)
        .map(|(&e, &c)| (e * c as f64 + 1.0) / (c as f64 + 2.0))
        .collect();
    Ok(Assessment {
        weights,
        mean_stack,
        train,
        train_labels,
        num_classes,
        depth,
        confidence,
        raw_class_errors,
        class_errors,
    })
}
