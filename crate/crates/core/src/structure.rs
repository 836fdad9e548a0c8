//! Condensed graph materialization.
//!
//! The graphless variant uses `H′` as features with identity structure. The
//! adjacency variant links condensed nodes whose embeddings have cosine
//! similarity above a threshold, then solves for features `X′` minimizing
//! `||Q X′ - H′||² + alpha tr(X′ᵀ L′ X′)` with `Q = Â′^K`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CgcError, Result};
use crate::graph::{normalize, NormalizedAdjacency, SparseAdjacency};
use crate::matrix::DenseMatrix;
use crate::par::Execution;

pub const DEFAULT_THRESHOLD: f64 = 0.9;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const JITTER_SCALE: f64 = 1e-8;
pub const JITTER_RETRIES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Identity,
    Adjacency(SparseAdjacency),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub threshold: f64,
    pub alpha: f64,
    pub depth: usize,
    /// Diagonal jitter actually used by the solve.
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensedGraph {
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub features: DenseMatrix,
    pub structure: Structure,
    pub gen_params: Option<GenParams>,
}

impl CondensedGraph {
    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn adjacency(&self) -> Option<&SparseAdjacency> {
        match &self.structure {
            Structure::Identity => None,
            Structure::Adjacency(a) => Some(a),
        }
    }

    /// Normalized structure; identity for the graphless variant.
    pub fn normalized(&self) -> Result<NormalizedAdjacency> {
        match &self.structure {
            Structure::Identity => Ok(NormalizedAdjacency::identity(self.num_nodes())),
            Structure::Adjacency(a) => normalize(a),
        }
    }
}

fn check_labels(h_prime: &DenseMatrix, labels: &[usize], num_classes: usize) -> Result<()> {
    if labels.len() != h_prime.rows() {
        return Err(CgcError::DimensionMismatch {
            context: "condensed labels vs rows",
            expected: h_prime.rows(),
            actual: labels.len(),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(CgcError::Structure(format!("label {y} outside [0, {num_classes})")));
    }
    Ok(())
}

pub fn make_graphless(
    h_prime: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
) -> Result<CondensedGraph> {
    check_labels(&h_prime, &labels, num_classes)?;
    Ok(CondensedGraph {
        labels,
        num_classes,
        features: h_prime,
        structure: Structure::Identity,
        gen_params: None,
    })
}

/// Edge `(i, j)`, `i != j`, iff `cos(h_i, h_j) > threshold`. Zero rows have
/// cosine 0 with everything.
pub fn build_adjacency(h_prime: &DenseMatrix, threshold: f64) -> Result<SparseAdjacency> {
    build_adjacency_with(h_prime, threshold, Execution::default())
}

pub fn build_adjacency_with(
    h_prime: &DenseMatrix,
    threshold: f64,
    exec: Execution,
) -> Result<SparseAdjacency> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(CgcError::InvalidArgument(format!(
            "cosine threshold must lie in [0, 1), got {threshold}"
        )));
    }
    let n = h_prime.rows();
    let mut unit = h_prime.clone();
    for i in 0..n {
        let row = unit.row_mut(i);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
        row.iter_mut().for_each(|x| *x *= inv);
    }
    let gram = unit.matmul_with(&unit.transpose(), exec)?;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if gram[(i, j)] > threshold {
                edges.push((i, j));
            }
        }
    }
    SparseAdjacency::from_undirected_edges(n, edges)
}

/// Dense `Â′^K`.
pub fn propagation_matrix(adj: &SparseAdjacency, depth: usize, exec: Execution) -> Result<DenseMatrix> {
    let a = normalize(adj)?.to_dense();
    let mut q = DenseMatrix::identity(adj.num_nodes());
    for _ in 0..depth {
        q = a.matmul_with(&q, exec)?;
    }
    Ok(q)
}

/// `||Q X - H||² + alpha tr(Xᵀ L X)`.
pub fn dirichlet_objective(
    q: &DenseMatrix,
    laplacian: &DenseMatrix,
    alpha: f64,
    x: &DenseMatrix,
    h: &DenseMatrix,
) -> Result<f64> {
    let resid = q.matmul(x)?.sub(h).frobenius_sq();
    let lx = laplacian.matmul(x)?;
    let energy: f64 = x.as_slice().iter().zip(lx.as_slice()).map(|(a, b)| a * b).sum();
    Ok(resid + alpha * energy)
}

/// `2 Qᵀ(Q X - H) + 2 alpha L X`.
pub fn dirichlet_gradient(
    q: &DenseMatrix,
    laplacian: &DenseMatrix,
    alpha: f64,
    x: &DenseMatrix,
    h: &DenseMatrix,
) -> Result<DenseMatrix> {
    let resid = q.matmul(x)?.sub(h);
    let mut g = q.t_matmul(&resid)?.scale(2.0);
    g.axpy(2.0 * alpha, &laplacian.matmul(x)?);
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSolution {
    pub features: DenseMatrix,
    pub jitter: f64,
    pub attempts: usize,
}

/// Solves `(QᵀQ + alpha L′ + jitter I) X′ = Qᵀ H′` by Cholesky. Without an
/// explicit jitter, it starts at `1e-8 * trace / N′` and grows tenfold on each
/// failed factorization, at most `JITTER_RETRIES` times.
pub fn solve_features(
    h_prime: &DenseMatrix,
    adj: &SparseAdjacency,
    alpha: f64,
    depth: usize,
    jitter: Option<f64>,
) -> Result<FeatureSolution> {
    solve_features_with(h_prime, adj, alpha, depth, jitter, Execution::default())
}

pub fn solve_features_with(
    h_prime: &DenseMatrix,
    adj: &SparseAdjacency,
    alpha: f64,
    depth: usize,
    jitter: Option<f64>,
    exec: Execution,
) -> Result<FeatureSolution> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(CgcError::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let n = adj.num_nodes();
    if h_prime.rows() != n {
        return Err(CgcError::DimensionMismatch {
            context: "condensed features vs adjacency",
            expected: n,
            actual: h_prime.rows(),
        });
    }
    let q = propagation_matrix(adj, depth, exec)?;
    let mut system = q.t_matmul_with(&q, exec)?;
    system.axpy(alpha, &adj.laplacian_dense());
    let rhs = q.t_matmul_with(h_prime, exec)?.to_nalgebra();
    let trace: f64 = (0..n).map(|i| system[(i, i)]).sum();
    let mut eps = match jitter {
        Some(j) if j >= 0.0 => j,
        Some(j) => return Err(CgcError::InvalidArgument(format!("jitter must be >= 0, got {j}"))),
        None => JITTER_SCALE * trace / n.max(1) as f64,
    };
    let base: DMatrix<f64> = system.to_nalgebra();
    let mut last_eps = eps;
    for attempt in 0..=JITTER_RETRIES {
        let mut m = base.clone();
        for i in 0..n {
            m[(i, i)] += eps;
        }
        if let Some(chol) = m.cholesky() {
            let x = DenseMatrix::from_nalgebra(&chol.solve(&rhs));
            if x.is_finite() {
                return Ok(FeatureSolution {
                    features: x,
                    jitter: eps,
                    attempts: attempt + 1,
                });
            }
        }
        last_eps = eps;
        eps = if eps > 0.0 { eps * 10.0 } else { JITTER_SCALE * trace.max(1.0) / n.max(1) as f64 };
    }
    Err(CgcError::Numerical(format!(
        "Cholesky factorization failed on a {n}x{n} system after {} attempts (trace {trace:.3e}, last jitter {last_eps:.3e}, alpha {alpha})",
        JITTER_RETRIES + 1
    )))
}

/// Settings for the adjacency variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyParams {
    pub threshold: f64,
    pub alpha: f64,
    pub depth: usize,
    /// `None` picks the trace-scaled default.
    pub jitter: Option<f64>,
}

/// Builds the adjacency variant from `H′`.
pub fn make_with_adjacency(
    h_prime: &DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
    params: AdjacencyParams,
    exec: Execution,
) -> Result<CondensedGraph> {
    check_labels(h_prime, &labels, num_classes)?;
    let adj = build_adjacency_with(h_prime, params.threshold, exec)?;
    let sol = solve_features_with(h_prime, &adj, params.alpha, params.depth, params.jitter, exec)?;
    Ok(CondensedGraph {
        labels,
        num_classes,
        features: sol.features,
        structure: Structure::Adjacency(adj),
        gen_params: Some(GenParams {
            threshold: params.threshold,
            alpha: params.alpha,
            depth: params.depth,
            jitter: sol.jitter,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn graphless_keeps_features_verbatim() {
        let h = random(4, 3, 1);
        let g = make_graphless(h.clone(), vec![0, 0, 1, 1], 2).unwrap();
        assert_eq!(g.features, h);
        assert_eq!(g.normalized().unwrap().to_dense(), DenseMatrix::identity(4));
    }

    #[test]
    fn cosine_threshold_example() {
        let h = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let a = build_adjacency(&h, 0.9).unwrap();
        assert_eq!(a.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn high_threshold_is_empty_and_zero_rows_isolated() {
        let h = DenseMatrix::from_rows(&[vec![1.0, 0.2], vec![0.9, 0.3], vec![0.0, 0.0]]).unwrap();
        assert_eq!(build_adjacency(&h, 0.999).unwrap().nnz(), 0);
        let a = build_adjacency(&h, 0.0).unwrap();
        assert_eq!(a.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn row_scaling_changes_no_edges() {
        let h = random(12, 4, 8);
        let mut scaled = h.clone();
        scaled.row_mut(5).iter_mut().for_each(|x| *x *= 3.0);
        for t in [0.1, 0.5, 0.8] {
            assert_eq!(build_adjacency(&h, t).unwrap(), build_adjacency(&scaled, t).unwrap());
        }
    }

    #[test]
    fn empty_graph_without_penalty_reproduces_h() {
        let h = random(6, 3, 2);
        let sol = solve_features(&h, &SparseAdjacency::empty(6), 0.0, 2, None).unwrap();
        assert!(sol.features.max_abs_diff(&h) <= 1e-6);
    }

    #[test]
    fn solution_is_stationary_and_minimal() {
        let h = random(20, 5, 3);
        let adj = build_adjacency(&h, 0.2).unwrap();
        assert!(adj.nnz() > 0);
        for alpha in [0.3, 1.0, 3.0] {
            let sol = solve_features(&h, &adj, alpha, 2, None).unwrap();
            let q = propagation_matrix(&adj, 2, Execution::Sequential).unwrap();
            let l = adj.laplacian_dense();
            let g = dirichlet_gradient(&q, &l, alpha, &sol.features, &h).unwrap();
            assert!(g.max_abs() <= 1e-6 * h.frobenius(), "alpha {alpha}: {}", g.max_abs());
            let best = dirichlet_objective(&q, &l, alpha, &sol.features, &h).unwrap();
            assert!(best <= dirichlet_objective(&q, &l, alpha, &h, &h).unwrap());
            for s in 0..50 {
                let delta = random(20, 5, 100 + s).scale(1e-3);
                let other = dirichlet_objective(&q, &l, alpha, &sol.features.add(&delta), &h).unwrap();
                assert!(best <= other);
            }
        }
    }

    #[test]
    fn threshold_out_of_range_rejected() {
        assert!(build_adjacency(&random(3, 2, 0), 1.0).is_err());
        assert!(build_adjacency(&random(3, 2, 0), -0.1).is_err());
    }
}
