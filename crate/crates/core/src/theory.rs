//! Numerical checks of the matching identities and bounds behind the method.
//!
//! * `parameter_matching`: the value chain from `||Θ* - Θ′*||²` to
//!   `||(ZᵀZ)⁻¹Zᵀ(Y - Z Z′ᵀ(Z′Z′ᵀ)⁻¹Y′)||²` at `λ = 0`, plus the push-through
//!   identity `Zᵀ(ZZᵀ + λI)⁻¹ = (ZᵀZ + λI)⁻¹Zᵀ`.
//! * `prototype_matching`: `||P′Z′ - PZ||²` written as a per-class sum.
//! * `matching_bound`: per-class gradient matching of half-MSE losses is bounded by a
//!   prototype term plus a correlation term times `||Θ||²`.
//! * `feature_bound`: `||H′Θ - P̂HΘ||² <= ||H′ - P̂H||² ||Θ||²`.
//! * `structure_solve`: the closed-form structure solve zeroes the gradient and beats
//!   the naive `X′ = H′`.
//!
//! The last step of the parameter chain is an argmin equivalence and is not tested numerically.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::one_hot;
use crate::error::{CgcError, Result};
use crate::graph::SparseAdjacency;
use crate::matrix::DenseMatrix;
use crate::seed;
use crate::structure::{
    build_adjacency, dirichlet_gradient, dirichlet_objective, propagation_matrix, solve_features,
};

pub const PARAMETER_MATCHING_TOL: f64 = 1e-8;
pub const PUSH_THROUGH_TOL: f64 = 1e-10;
pub const PUSH_THROUGH_LAMBDA: f64 = 1e-3;
pub const PROTOTYPE_TOL: f64 = 1e-10;
pub const BOUND_SLACK: f64 = 1e-10;
pub const STRUCTURE_GRAD_TOL: f64 = 1e-6;
/// Ridge values for the structure instances.
pub const STRUCTURE_ALPHAS: [f64; 3] = [0.3, 1.0, 3.0];
const RANK_RTOL: f64 = 1e-8;
const MAX_REDRAWS: usize = 100;

fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn na(m: &DenseMatrix) -> DMatrix<f64> {
    m.to_nalgebra()
}

/// Labels covering every class at least once, then uniform.
fn labels_covering<R: Rng>(n: usize, c: usize, rng: &mut R) -> Vec<usize> {
    let mut y: Vec<usize> = (0..n).map(|i| if i < c { i } else { rng.random_range(0..c) }).collect();
    y.shuffle(rng);
    y
}

fn well_conditioned(m: &DMatrix<f64>) -> bool {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min > RANK_RTOL * max
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    /// `n × d`, full column rank.
    pub z: DenseMatrix,
    /// `n′ × d`, full row rank.
    pub z_prime: DenseMatrix,
    pub y: Vec<usize>,
    pub y_prime: Vec<usize>,
    pub num_classes: usize,
    /// `d × c`, unit Gaussian entries.
    pub theta: DenseMatrix,
    pub lambda: f64,
}

impl RandomInstance {
    /// Requires `n > d > n′ >= c >= 1`; redraws until the rank checks pass.
    pub fn generate<R: Rng>(n: usize, d: usize, n_prime: usize, c: usize, rng: &mut R) -> Result<Self> {
        if !(n > d && d > n_prime && n_prime >= c && c >= 1) {
            return Err(CgcError::InvalidArgument(format!(
                "need n > d > n' >= c >= 1, got n={n} d={d} n'={n_prime} c={c}"
            )));
        }
        for _ in 0..MAX_REDRAWS {
            let z = gaussian(n, d, rng);
            let z_prime = gaussian(n_prime, d, rng);
            if well_conditioned(&na(&z)) && well_conditioned(&na(&z_prime)) {
                return Ok(Self {
                    z,
                    z_prime,
                    y: labels_covering(n, c, rng),
                    y_prime: labels_covering(n_prime, c, rng),
                    num_classes: c,
                    theta: gaussian(d, c, rng),
                    lambda: PUSH_THROUGH_LAMBDA,
                });
            }
        }
        Err(CgcError::Numerical(format!("no full-rank draw after {MAX_REDRAWS} attempts")))
    }

    /// Random sizes in a small desk-scale range.
    pub fn random<R: Rng>(rng: &mut R) -> Result<Self> {
        let c = rng.random_range(2..=3);
        let n_prime = rng.random_range(c..=c + 3);
        let d = rng.random_range(n_prime + 1..=n_prime + 6);
        let n = rng.random_range(d + 5..=d + 30);
        Self::generate(n, d, n_prime, c, rng)
    }
}

fn inv(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.try_inverse().ok_or_else(|| CgcError::Numerical("singular matrix in theory check".into()))
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 { 0.0 } else { (a - b).abs() / s }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterMatchingReport {
    /// `||Θ* - Θ′*||²` with `Θ* = (ZᵀZ)⁻¹ZᵀY`, `Θ′* = Z′ᵀ(Z′Z′ᵀ)⁻¹Y′`.
    pub parameter_gap: f64,
    /// Largest relative difference along the chain of equal values.
    pub chain_residual: f64,
    /// `||Zᵀ(ZZᵀ+λI)⁻¹ - (ZᵀZ+λI)⁻¹Zᵀ|| / ||(ZᵀZ+λI)⁻¹Zᵀ||`.
    pub push_through_residual: f64,
}

pub fn check_parameter_matching(inst: &RandomInstance) -> Result<ParameterMatchingReport> {
    let z = na(&inst.z);
    let zp = na(&inst.z_prime);
    let y = na(&one_hot(&inst.y, inst.num_classes));
    let yp = na(&one_hot(&inst.y_prime, inst.num_classes));
    let zt = z.transpose();
    let ztz_inv = inv(&zt * &z)?;
    let proj = &ztz_inv * &zt;
    let zpt = zp.transpose();
    let theta_p = &zpt * inv(&zp * &zpt)? * &yp;

    let theta = &proj * &y;
    let v1 = (&theta - &theta_p).norm_squared();
    let v2 = (&theta - &proj * &z * &theta_p).norm_squared();
    let v3 = (&proj * (&y - &z * &theta_p)).norm_squared();
    let chain_residual = rel(v1, v2).max(rel(v1, v3));

    let n = z.nrows();
    let d = z.ncols();
    let lam = inst.lambda;
    let left = &zt * inv(&z * &zt + DMatrix::identity(n, n) * lam)?;
    let right = inv(&zt * &z + DMatrix::identity(d, d) * lam)? * &zt;
    let push_through_residual = (&left - &right).norm() / right.norm();
    Ok(ParameterMatchingReport {
        parameter_gap: v1,
        chain_residual,
        push_through_residual,
    })
}

/// Row-stochastic class-mean operator, `c × n`.
fn prototype_operator(labels: &[usize], c: usize) -> DMatrix<f64> {
    let mut counts = vec![0usize; c];
    for &y in labels {
        counts[y] += 1;
    }
    DMatrix::from_fn(c, labels.len(), |i, j| {
        if labels[j] == i { 1.0 / counts[i] as f64 } else { 0.0 }
    })
}

/// Rows of class `i`.
fn class_rows(m: &DMatrix<f64>, labels: &[usize], class: usize) -> DMatrix<f64> {
    let idx: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == class).collect();
    m.select_rows(idx.iter())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrototypeReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

pub fn check_prototype_matching(inst: &RandomInstance) -> Result<PrototypeReport> {
    let c = inst.num_classes;
    let z = na(&inst.z);
    let zp = na(&inst.z_prime);
    let lhs = (prototype_operator(&inst.y_prime, c) * &zp - prototype_operator(&inst.y, c) * &z).norm_squared();
    let y = na(&one_hot(&inst.y, c));
    let yp = na(&one_hot(&inst.y_prime, c));
    let mut rhs = 0.0;
    for i in 0..c {
        let zi = class_rows(&z, &inst.y, i);
        let yi = class_rows(&y, &inst.y, i);
        let zpi = class_rows(&zp, &inst.y_prime, i);
        let ypi = class_rows(&yp, &inst.y_prime, i);
        if zi.nrows() == 0 || zpi.nrows() == 0 {
            return Err(CgcError::MissingClass { class: i });
        }
        let a = zi.transpose() * yi / zi.nrows() as f64;
        let b = zpi.transpose() * ypi / zpi.nrows() as f64;
        rhs += (a - b).norm_squared();
    }
    Ok(PrototypeReport { lhs, rhs, residual: rel(lhs, rhs) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundDraw {
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundDraw {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + BOUND_SLACK
    }

    pub fn violation(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Per-class statistics used by the gradient-matching bound.
struct ClassStats {
    /// `(1/|C|) HᵢᵀHᵢ`
    corr: DMatrix<f64>,
    /// `(1/|C|) HᵢᵀYᵢ`
    proto: DMatrix<f64>,
}

fn class_stats(h: &DMatrix<f64>, labels: &[usize], c: usize) -> Result<Vec<ClassStats>> {
    let y = na(&one_hot(labels, c));
    (0..c)
        .map(|i| {
            let hi = class_rows(h, labels, i);
            if hi.nrows() == 0 {
                return Err(CgcError::MissingClass { class: i });
            }
            let yi = class_rows(&y, labels, i);
            let s = 1.0 / hi.nrows() as f64;
            Ok(ClassStats {
                corr: hi.transpose() * &hi * s,
                proto: hi.transpose() * yi * s,
            })
        })
        .collect()
}

/// Evaluates both sides of the gradient-matching bound for each `Θ`.
pub fn check_matching_bound(
    h: &DenseMatrix,
    labels: &[usize],
    h_prime: &DenseMatrix,
    labels_prime: &[usize],
    num_classes: usize,
    thetas: &[DenseMatrix],
) -> Result<Vec<BoundDraw>> {
    let full = class_stats(&na(h), labels, num_classes)?;
    let cond = class_stats(&na(h_prime), labels_prime, num_classes)?;
    let proto_term: f64 = full.iter().zip(&cond).map(|(a, b)| (&a.proto - &b.proto).norm_squared()).sum();
    let corr_term: f64 = full.iter().zip(&cond).map(|(a, b)| (&a.corr - &b.corr).norm_squared()).sum();
    thetas
        .iter()
        .map(|t| {
            let t = na(t);
            if t.nrows() != h.cols() || t.ncols() != num_classes {
                return Err(CgcError::DimensionMismatch {
                    context: "theta shape",
                    expected: h.cols() * num_classes,
                    actual: t.nrows() * t.ncols(),
                });
            }
            // Gradient of 1/2 ||H Θ - Y||² is Hᵀ H Θ - Hᵀ Y.
            let lhs: f64 = full
                .iter()
                .zip(&cond)
                .map(|(a, b)| ((&a.corr * &t - &a.proto) - (&b.corr * &t - &b.proto)).norm_squared())
                .sum();
            Ok(BoundDraw { lhs, rhs: proto_term + corr_term * t.norm_squared() })
        })
        .collect()
}

/// `||H′Θ - P̂HΘ||²` against `||H′ - P̂H||² ||Θ||²` for each `Θ`.
pub fn check_feature_bound(
    h: &DenseMatrix,
    h_prime: &DenseMatrix,
    p_hat: &DenseMatrix,
    thetas: &[DenseMatrix],
) -> Result<Vec<BoundDraw>> {
    let diff = na(h_prime) - na(p_hat) * na(h);
    let gap = diff.norm_squared();
    thetas
        .iter()
        .map(|t| {
            let t = na(t);
            if t.nrows() != diff.ncols() {
                return Err(CgcError::DimensionMismatch {
                    context: "theta rows vs feature width",
                    expected: diff.ncols(),
                    actual: t.nrows(),
                });
            }
            Ok(BoundDraw { lhs: (&diff * &t).norm_squared(), rhs: gap * t.norm_squared() })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureSolveReport {
    pub alpha: f64,
    pub edges: usize,
    /// `max |∇L(X′)| / ||H′||`.
    pub gradient_ratio: f64,
    pub objective: f64,
    pub objective_at_h: f64,
    /// Objective at `X′ + δ` never fell below the objective at `X′`.
    pub perturbations_ok: bool,
}

pub fn check_structure_solve<R: Rng>(
    h_prime: &DenseMatrix,
    adj: &SparseAdjacency,
    alpha: f64,
    depth: usize,
    perturbations: usize,
    rng: &mut R,
) -> Result<StructureSolveReport> {
    let sol = solve_features(h_prime, adj, alpha, depth, None)?;
    let q = propagation_matrix(adj, depth, crate::par::Execution::Sequential)?;
    let l = adj.laplacian_dense();
    let x = &sol.features;
    let grad = dirichlet_gradient(&q, &l, alpha, x, h_prime)?;
    let objective = dirichlet_objective(&q, &l, alpha, x, h_prime)?;
    let objective_at_h = dirichlet_objective(&q, &l, alpha, h_prime, h_prime)?;
    let mut perturbations_ok = true;
    for _ in 0..perturbations {
        let mut moved = x.clone();
        moved.axpy(1e-3, &gaussian(x.rows(), x.cols(), rng));
        if dirichlet_objective(&q, &l, alpha, &moved, h_prime)? < objective {
            perturbations_ok = false;
        }
    }
    Ok(StructureSolveReport {
        alpha,
        edges: adj.num_edges(),
        gradient_ratio: grad.max_abs() / h_prime.frobenius(),
        objective,
        objective_at_h,
        perturbations_ok,
    })
}

/// Clustered rows so the cosine graph has edges.
pub fn random_structure_instance<R: Rng>(n: usize, d: usize, c: usize, rng: &mut R) -> (DenseMatrix, Vec<usize>) {
    let centers = gaussian(c, d, rng).scale(2.0);
    let labels = labels_covering(n, c, rng);
    let h = DenseMatrix::from_fn(n, d, |i, j| centers[(labels[i], j)] + 0.5 * rng.sample::<f64, _>(StandardNormal));
    (h, labels)
}

/// Random calibrated aggregation: each class's rows split into groups, with
/// positive weights summing to one per group.
pub fn random_aggregation<R: Rng>(labels: &[usize], groups_per_class: &[usize], rng: &mut R) -> DenseMatrix {
    let total: usize = groups_per_class.iter().sum();
    let mut p = DenseMatrix::zeros(total, labels.len());
    let mut offset = 0;
    for (class, &g) in groups_per_class.iter().enumerate() {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == class).collect();
        rows.shuffle(rng);
        for (k, &r) in rows.iter().enumerate() {
            p[(offset + k % g, r)] = rng.random_range(0.5..1.5);
        }
        offset += g;
    }
    for i in 0..total {
        let s: f64 = p.row(i).iter().sum();
        if s > 0.0 {
            p.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    pub draws: usize,
    pub passed: usize,
    /// Worst residual (relative error, ratio, or bound violation).
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn ok(&self) -> bool {
        self.passed == self.draws
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub seed: u64,
    pub draws: usize,
    pub rows: Vec<CheckRow>,
}

impl TheoryReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(CheckRow::ok)
    }
}

#[derive(Default)]
struct Tally {
    draws: usize,
    passed: usize,
    worst: f64,
}

impl Tally {
    fn add(&mut self, residual: f64, ok: bool) {
        self.draws += 1;
        self.passed += usize::from(ok);
        if residual > self.worst || self.draws == 1 {
            self.worst = residual;
        }
    }

    fn row(self, check: &str, tolerance: f64) -> CheckRow {
        CheckRow {
            check: check.to_string(),
            draws: self.draws,
            passed: self.passed,
            worst: self.worst,
            tolerance,
        }
    }
}

/// Runs every check on `draws` seeded instances.
pub fn verify_all(seed_value: u64, draws: usize) -> Result<TheoryReport> {
    let mut t = [(); 8].map(|_| Tally::default());
    for draw in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_seed(
            seed::derive_seed(seed_value, seed::stream::THEORY),
            draw as u64,
        ));
        let inst = RandomInstance::random(&mut rng)?;
        let p1 = check_parameter_matching(&inst)?;
        t[0].add(p1.chain_residual, p1.chain_residual <= PARAMETER_MATCHING_TOL);
        t[1].add(p1.push_through_residual, p1.push_through_residual <= PUSH_THROUGH_TOL);
        let p2 = check_prototype_matching(&inst)?;
        t[2].add(p2.residual, p2.residual <= PROTOTYPE_TOL);

        let theta = [inst.theta.clone()];
        let b3 = check_matching_bound(&inst.z, &inst.y, &inst.z_prime, &inst.y_prime, inst.num_classes, &theta)?[0];
        t[3].add(b3.violation(), b3.holds());

        let counts = crate::dataset::LabeledNodes::new(inst.y.clone(), inst.num_classes)?
            .class_counts(&(0..inst.y.len()).collect::<Vec<_>>());
        let groups: Vec<usize> = counts.iter().map(|&n| rng.random_range(1..=n.min(3))).collect();
        let p_hat = random_aggregation(&inst.y, &groups, &mut rng);
        let mut h_prime = p_hat.matmul(&inst.z)?;
        h_prime.axpy(0.1, &gaussian(h_prime.rows(), h_prime.cols(), &mut rng));
        let theta10 = [gaussian(inst.z.cols(), inst.num_classes, &mut rng)];
        let b10 = check_feature_bound(&inst.z, &h_prime, &p_hat, &theta10)?[0];
        t[4].add(b10.violation(), b10.holds());

        let (h, _) = random_structure_instance(20, 5, 3, &mut rng);
        let adj = build_adjacency(&h, 0.5)?;
        let alpha = STRUCTURE_ALPHAS[draw % STRUCTURE_ALPHAS.len()];
        let p4 = check_structure_solve(&h, &adj, alpha, 2, 5, &mut rng)?;
        t[5].add(p4.gradient_ratio, p4.gradient_ratio <= STRUCTURE_GRAD_TOL);
        t[6].add(p4.objective - p4.objective_at_h, p4.objective <= p4.objective_at_h);
        t[7].add(if p4.perturbations_ok { 0.0 } else { 1.0 }, p4.perturbations_ok);
    }
    let [t0, t1, t2, t3, t4, t5, t6, t7] = t;
    Ok(TheoryReport {
        seed: seed_value,
        draws,
        rows: vec![
            t0.row("matching_chain", PARAMETER_MATCHING_TOL),
            t1.row("matching_push_through", PUSH_THROUGH_TOL),
            t2.row("prototype_matching", PROTOTYPE_TOL),
            t3.row("matching_bound", BOUND_SLACK),
            t4.row("feature_bound", BOUND_SLACK),
            t5.row("structure_gradient", STRUCTURE_GRAD_TOL),
            t6.row("structure_objective", 0.0),
            t7.row("structure_convexity", 0.0),
        ],
    })
}
