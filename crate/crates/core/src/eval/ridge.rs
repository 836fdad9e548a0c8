//! Closed-form SGC evaluator: propagate, ridge-regress onto one-hot labels
//! with an unpenalized intercept, predict by argmax.

use std::time::Instant;

use nalgebra::DMatrix;

use super::{accuracy, check_compatible, EvalModel, EvalReport};
use crate::assessment::min_norm_lstsq;
use crate::dataset::{one_hot, Dataset};
use crate::error::{CgcError, Result};
use crate::graph::normalize;
use crate::matrix::DenseMatrix;
use crate::par::Execution;
use crate::propagation::power_apply;
use crate::structure::CondensedGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub weights: DenseMatrix,
    pub intercept: Vec<f64>,
}

impl RidgeModel {
    pub fn scores(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut s = x.matmul(&self.weights)?;
        for i in 0..s.rows() {
            for (v, b) in s.row_mut(i).iter_mut().zip(&self.intercept) {
                *v += b;
            }
        }
        Ok(s)
    }

    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<usize>> {
        Ok(self.scores(x)?.argmax_rows())
    }
}

fn center(m: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let mu = m.column_means();
    let mut c = m.clone();
    for i in 0..c.rows() {
        for (v, u) in c.row_mut(i).iter_mut().zip(&mu) {
            *v -= u;
        }
    }
    (c, mu)
}

fn spd_solve(mut a: DMatrix<f64>, b: DMatrix<f64>, lambda: f64) -> Option<DMatrix<f64>> {
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    a.cholesky().map(|c| c.solve(&b))
}

/// Ridge on centered data; solves in the primal or dual, whichever is smaller.
pub fn fit_ridge(x: &DenseMatrix, labels: &[usize], num_classes: usize, lambda: f64) -> Result<RidgeModel> {
    if x.rows() != labels.len() || x.rows() == 0 {
        return Err(CgcError::DimensionMismatch {
            context: "ridge rows vs labels",
            expected: x.rows(),
            actual: labels.len(),
        });
    }
    let (xc, xmu) = center(x);
    let (yc, ymu) = center(&one_hot(labels, num_classes));
    let solved = if lambda > 0.0 {
        if x.rows() < x.cols() {
            let k = xc.matmul(&xc.transpose())?.to_nalgebra();
            spd_solve(k, yc.to_nalgebra(), lambda)
                .map(|alpha| xc.t_matmul(&DenseMatrix::from_nalgebra(&alpha)))
                .transpose()?
        } else {
            let g = xc.t_matmul(&xc)?.to_nalgebra();
            spd_solve(g, xc.t_matmul(&yc)?.to_nalgebra(), lambda).map(|w| DenseMatrix::from_nalgebra(&w))
        }
    } else {
        None
    };
    let weights = match solved {
        Some(w) if w.is_finite() => w,
        _ => min_norm_lstsq(&xc, &yc)?,
    };
    let shift = DenseMatrix::from_vec(1, xmu.len(), xmu)?.matmul(&weights)?;
    let intercept = ymu.iter().zip(shift.row(0)).map(|(m, s)| m - s).collect();
    Ok(RidgeModel { weights, intercept })
}

fn test_accuracy(model: &RidgeModel, original: &Dataset, depth: usize) -> Result<f64> {
    let op = normalize(&original.adjacency)?;
    let h = power_apply(op.operator(), &original.features, depth, Execution::default())?;
    let pred_test = model.predict(&h.select_rows(&original.test))?;
    let mut pred = vec![usize::MAX; original.num_nodes()];
    for (&i, p) in original.test.iter().zip(pred_test) {
        pred[i] = p;
    }
    Ok(accuracy(&pred, original.labels.labels(), &original.test))
}

/// Trains on the condensed graph, tests on the original graph.
pub fn eval_sgc_ridge(
    graph: &CondensedGraph,
    original: &Dataset,
    depth: usize,
    ridge: f64,
) -> Result<EvalReport> {
    check_compatible(graph, original)?;
    let start = Instant::now();
    let op = graph.normalized()?;
    let h = power_apply(op.operator(), &graph.features, depth, Execution::default())?;
    let model = fit_ridge(&h, &graph.labels, graph.num_classes, ridge)?;
    let acc = test_accuracy(&model, original, depth)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(EvalReport::from_runs(EvalModel::SgcRidge, vec![(Some(acc), ms)]))
}

/// Trains on the original graph's training nodes.
pub fn eval_sgc_ridge_whole(original: &Dataset, depth: usize, ridge: f64) -> Result<EvalReport> {
    let start = Instant::now();
    let op = normalize(&original.adjacency)?;
    let h = power_apply(op.operator(), &original.features, depth, Execution::default())?;
    let model = fit_ridge(
        &h.select_rows(&original.train),
        &original.train_labels(),
        original.num_classes(),
        ridge,
    )?;
    let acc = test_accuracy(&model, original, depth)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(EvalReport::from_runs(EvalModel::SgcRidge, vec![(Some(acc), ms)]))
}
