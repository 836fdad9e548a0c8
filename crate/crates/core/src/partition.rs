//! Per-class partition of the pool and calibrated aggregation into `H′`.
//!
//! Subclass ids are global: class `i` owns ids `offsets[i]..offsets[i + 1]`,
//! so rows of `H′` come out grouped in ascending class order.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augmentation::AugmentedPool;
use crate::error::{CgcError, Result};
use crate::matrix::DenseMatrix;
use crate::par::{self, Execution};
use crate::seed;

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    #[default]
    Kmeans,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// `exp(r / tau)` normalized within the subclass.
    #[default]
    Softmax,
    /// `r / tau` normalized within the subclass; `tau` cancels.
    Linear,
    /// Plain mean.
    Uniform,
}

macro_rules! lowercase_enum_str {
    ($ty:ty, $($variant:ident => $name:literal),+) => {
        impl std::str::FromStr for $ty {
            type Err = CgcError;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(<$ty>::$variant),)+
                    other => Err(CgcError::InvalidArgument(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"), other
                    ))),
                }
            }
        }
        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(match self { $(<$ty>::$variant => $name,)+ })
            }
        }
    };
}

lowercase_enum_str!(ClusterMethod, Kmeans => "kmeans", Random => "random");
lowercase_enum_str!(Weighting, Softmax => "softmax", Linear => "linear", Uniform => "uniform");

/// Condensed node count per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CondensedLabelPlan {
    pub sizes: Vec<usize>,
}

impl CondensedLabelPlan {
    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn num_classes(&self) -> usize {
        self.sizes.len()
    }

    /// `offsets[i]` is the first subclass id of class `i`; length `c + 1`.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.sizes.len() + 1);
        out.push(0);
        for &s in &self.sizes {
            out.push(out.last().unwrap() + s);
        }
        out
    }

    /// Label of every condensed node, ascending.
    pub fn labels(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
            .collect()
    }
}

/// Largest-remainder apportionment of `n_prime` nodes by training-class
/// proportions, with at least one node per class. Ties go to the lower class.
pub fn plan_labels(
    train_labels: &[usize],
    num_classes: usize,
    n_prime: usize,
) -> Result<CondensedLabelPlan> {
    if n_prime < num_classes {
        return Err(CgcError::InvalidArgument(format!(
            "condensed size {n_prime} is smaller than the class count {num_classes}"
        )));
    }
    let mut counts = vec![0usize; num_classes];
    for &y in train_labels {
        if y >= num_classes {
            return Err(CgcError::Structure(format!("label {y} outside [0, {num_classes})")));
        }
        counts[y] += 1;
    }
    let total = train_labels.len() as f64;
    let quota: Vec<f64> = counts
        .iter()
        .map(|&c| if total > 0.0 { n_prime as f64 * c as f64 / total } else { 0.0 })
        .collect();
    let mut sizes: Vec<usize> = quota.iter().map(|&q| (q.floor() as usize).max(1)).collect();
    let mut assigned: usize = sizes.iter().sum();
    while assigned < n_prime {
        let mut best = 0;
        for i in 1..num_classes {
            if quota[i] - sizes[i] as f64 > quota[best] - sizes[best] as f64 {
                best = i;
            }
        }
        sizes[best] += 1;
        assigned += 1;
    }
    while assigned > n_prime {
        // Take from the most over-allocated class; ties spare the lower index.
        let mut worst = None;
        for i in (0..num_classes).rev() {
            if sizes[i] <= 1 {
                continue;
            }
            let slack = quota[i] - sizes[i] as f64;
            match worst {
                Some(w) if quota[w] - sizes[w] as f64 <= slack => {}
                _ => worst = Some(i),
            }
        }
        let w = worst.expect("n_prime >= num_classes leaves a reducible class");
        sizes[w] -= 1;
        assigned -= 1;
    }
    Ok(CondensedLabelPlan { sizes })
}

/// Result of Lloyd's algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub assignments: Vec<usize>,
    pub centroids: DenseMatrix,
    /// Within-cluster SSE after each centroid update.
    pub history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn row_sq_norms(m: &DenseMatrix) -> Vec<f64> {
    m.row_iter().map(|r| r.iter().map(|x| x * x).sum()).collect()
}

/// Nearest centroid per point; ties go to the lower cluster index.
fn nearest(points: &DenseMatrix, centroids: &DenseMatrix, exec: Execution) -> Result<Vec<usize>> {
    let cross = points.matmul_with(&centroids.transpose(), exec)?;
    let cn = row_sq_norms(centroids);
    Ok(par::map_range(exec, points.rows(), |i| {
        let row = cross.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, (&x, &n)) in row.iter().zip(&cn).enumerate() {
            let d = n - 2.0 * x;
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }))
}

fn means(points: &DenseMatrix, assignments: &[usize], k: usize) -> DenseMatrix {
    let mut sums = DenseMatrix::zeros(k, points.cols());
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, x) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            let inv = 1.0 / n as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
        }
    }
    sums
}

fn sse(points: &DenseMatrix, assignments: &[usize], centroids: &DenseMatrix) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| sq_dist(points.row(i), centroids.row(a)))
        .sum()
}

fn kmeans_pp<R: Rng>(points: &DenseMatrix, k: usize, rng: &mut R) -> DenseMatrix {
    let n = points.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // Every point coincides with a chosen center.
            Err(_) => {
                let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    points.select_rows(&chosen)
}

/// Moves the point farthest from its centroid in the largest cluster into each
/// empty cluster.
fn repair_empty(
    points: &DenseMatrix,
    assignments: &mut [usize],
    centroids: &mut DenseMatrix,
    k: usize,
) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let largest = (0..k).fold(0, |b, c| if counts[c] > counts[b] { c } else { b });
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &a) in assignments.iter().enumerate() {
            if a == largest {
                let d = sq_dist(points.row(i), centroids.row(largest));
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
        }
        let i = far.expect("largest cluster is non-empty");
        assignments[i] = empty;
        centroids.row_mut(empty).copy_from_slice(points.row(i));
    }
}

/// k-means++ seeding followed by Lloyd iterations until the relative SSE change
/// drops below `KMEANS_REL_TOL` or `KMEANS_MAX_ITER` rounds pass.
pub fn kmeans<R: Rng>(
    points: &DenseMatrix,
    k: usize,
    rng: &mut R,
    exec: Execution,
) -> Result<KMeansFit> {
    check_cluster_args(points, k)?;
    let mut centroids = kmeans_pp(points, k, rng);
    let mut assignments = vec![usize::MAX; points.rows()];
    let mut history = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        let mut next = nearest(points, &centroids, exec)?;
        repair_empty(points, &mut next, &mut centroids, k);
        let changed = next != assignments;
        assignments = next;
        centroids = means(points, &assignments, k);
        let obj = sse(points, &assignments, &centroids);
        let prev = history.last().copied();
        history.push(obj);
        if !changed {
            break;
        }
        if let Some(prev) = prev {
            if prev <= 0.0 || (prev - obj).abs() / prev < KMEANS_REL_TOL {
                break;
            }
        }
    }
    Ok(KMeansFit {
        assignments,
        centroids,
        history,
    })
}

fn check_cluster_args(points: &DenseMatrix, k: usize) -> Result<()> {
    if k == 0 || points.rows() == 0 {
        return Err(CgcError::InvalidArgument(format!(
            "clustering needs k >= 1 and at least one point (k={k}, points={})",
            points.rows()
        )));
    }
    if k > points.rows() {
        return Err(CgcError::InvalidArgument(format!(
            "cannot form {k} clusters from {} points; raise the augmentation percentage p",
            points.rows()
        )));
    }
    Ok(())
}

/// Uniform random assignment with every cluster non-empty.
pub fn random_assignment<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = if pos < k { pos } else { rng.random_range(0..k) };
    }
    out
}

pub fn cluster_class(
    points: &DenseMatrix,
    k: usize,
    method: ClusterMethod,
    seed_value: u64,
) -> Result<Vec<usize>> {
    cluster_class_with(points, k, method, seed_value, Execution::default())
}

pub fn cluster_class_with(
    points: &DenseMatrix,
    k: usize,
    method: ClusterMethod,
    seed_value: u64,
    exec: Execution,
) -> Result<Vec<usize>> {
    check_cluster_args(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_value);
    match method {
        ClusterMethod::Kmeans => Ok(kmeans(points, k, &mut rng, exec)?.assignments),
        ClusterMethod::Random => Ok(random_assignment(points.rows(), k, &mut rng)),
    }
}

/// Clusters every class of the pool independently and returns global subclass
/// ids per pool row. Class `i` uses the child seed `derive_seed(stage, i)`.
pub fn partition_pool(
    pool: &AugmentedPool,
    plan: &CondensedLabelPlan,
    method: ClusterMethod,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<usize>> {
    if plan.num_classes() != pool.num_classes {
        return Err(CgcError::DimensionMismatch {
            context: "label plan classes vs pool classes",
            expected: pool.num_classes,
            actual: plan.num_classes(),
        });
    }
    let rows = pool.rows_by_class();
    for (class, r) in rows.iter().enumerate() {
        if plan.sizes[class] > r.len() {
            return Err(CgcError::TooFewPoints {
                class,
                clusters: plan.sizes[class],
                points: r.len(),
            });
        }
    }
    let stage = seed::derive_seed(master_seed, seed::stream::PARTITION);
    let offsets = plan.offsets();
    let per_class = par::try_map_range(exec, rows.len(), |class| {
        let points = pool.embeddings.select_rows(&rows[class]);
        cluster_class_with(
            &points,
            plan.sizes[class],
            method,
            seed::derive_seed(stage, class as u64),
            exec,
        )
    })?;
    let mut out = vec![0; pool.len()];
    for (class, local) in per_class.iter().enumerate() {
        for (&r, &a) in rows[class].iter().zip(local) {
            out[r] = offsets[class] + a;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub sizes: Vec<usize>,
    /// Global subclass id per pool row.
    pub assignments: Vec<usize>,
    /// Aggregation weight per pool row; sums to 1 within each subclass.
    pub weights: Vec<f64>,
    pub h_prime: DenseMatrix,
    pub y_prime: Vec<usize>,
    /// Sum over pool rows of the squared distance to their aggregated row.
    pub objective: f64,
}

/// Weights of one subclass from the confidences of its members.
pub fn subclass_weights(confidence: &[f64], tau: f64, mode: Weighting) -> Vec<f64> {
    let n = confidence.len();
    let uniform = || vec![1.0 / n as f64; n];
    match mode {
        Weighting::Uniform => uniform(),
        Weighting::Softmax => {
            let max = confidence.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = confidence.iter().map(|&r| ((r - max) / tau).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| x / s).collect()
        }
        Weighting::Linear => {
            // (r / tau) / sum(r / tau) = r / sum(r)
            let s: f64 = confidence.iter().sum();
            if s > 0.0 {
                confidence.iter().map(|&r| r / s).collect()
            } else {
                uniform()
            }
        }
    }
}

fn group_rows(assignments: &[usize], total: usize) -> Result<Vec<Vec<usize>>> {
    let mut groups = vec![Vec::new(); total];
    for (r, &a) in assignments.iter().enumerate() {
        if a >= total {
            return Err(CgcError::IndexOutOfRange {
                index: a,
                num_nodes: total,
                context: "subclass assignment".into(),
            });
        }
        groups[a].push(r);
    }
    if let Some(empty) = groups.iter().position(Vec::is_empty) {
        return Err(CgcError::Structure(format!("subclass {empty} has no members")));
    }
    Ok(groups)
}

pub fn aggregate(
    pool: &AugmentedPool,
    plan: &CondensedLabelPlan,
    assignments: &[usize],
    tau: f64,
    mode: Weighting,
) -> Result<PartitionPlan> {
    if mode == Weighting::Softmax && !(tau > 0.0) {
        return Err(CgcError::InvalidArgument(format!("softmax needs tau > 0, got {tau}")));
    }
    if assignments.len() != pool.len() {
        return Err(CgcError::DimensionMismatch {
            context: "assignments vs pool rows",
            expected: pool.len(),
            actual: assignments.len(),
        });
    }
    let total = plan.total();
    let groups = group_rows(assignments, total)?;
    let y_prime = plan.labels();
    let d = pool.embeddings.cols();
    let mut weights = vec![0.0; pool.len()];
    let mut h_prime = DenseMatrix::zeros(total, d);
    for (s, members) in groups.iter().enumerate() {
        if let Some(&bad) = members.iter().find(|&&r| pool.labels[r] != y_prime[s]) {
            return Err(CgcError::Structure(format!(
                "pool row {bad} of class {} assigned to subclass {s} of class {}",
                pool.labels[bad], y_prime[s]
            )));
        }
        let conf: Vec<f64> = members.iter().map(|&r| pool.confidence[r]).collect();
        let w = subclass_weights(&conf, tau, mode);
        let out = h_prime.row_mut(s);
        for (&r, &wr) in members.iter().zip(&w) {
            weights[r] = wr;
            for (o, x) in out.iter_mut().zip(pool.embeddings.row(r)) {
                *o += wr * x;
            }
        }
    }
    let objective = partition_objective(&h_prime, assignments, pool)?;
    Ok(PartitionPlan {
        sizes: plan.sizes.clone(),
        assignments: assignments.to_vec(),
        weights,
        h_prime,
        y_prime,
        objective,
    })
}

/// `sum_k ||pool_k - X′[π(k)]||²`.
pub fn partition_objective(
    x_prime: &DenseMatrix,
    assignments: &[usize],
    pool: &AugmentedPool,
) -> Result<f64> {
    check_objective_shapes(x_prime, assignments, pool)?;
    Ok(sse(&pool.embeddings, assignments, x_prime))
}

/// `||X′ - P̂ H||²` with `P̂` the uniform aggregation matrix of the partition.
pub fn simplified_dm_objective(
    x_prime: &DenseMatrix,
    assignments: &[usize],
    pool: &AugmentedPool,
) -> Result<f64> {
    check_objective_shapes(x_prime, assignments, pool)?;
    group_rows(assignments, x_prime.rows())?;
    let centroids = means(&pool.embeddings, assignments, x_prime.rows());
    Ok(x_prime.sub(&centroids).frobenius_sq())
}

fn check_objective_shapes(
    x_prime: &DenseMatrix,
    assignments: &[usize],
    pool: &AugmentedPool,
) -> Result<()> {
    if assignments.len() != pool.len() {
        return Err(CgcError::DimensionMismatch {
            context: "assignments vs pool rows",
            expected: pool.len(),
            actual: assignments.len(),
        });
    }
    if x_prime.cols() != pool.embeddings.cols() {
        return Err(CgcError::DimensionMismatch {
            context: "condensed vs pool feature width",
            expected: pool.embeddings.cols(),
            actual: x_prime.cols(),
        });
    }
    if let Some(&a) = assignments.iter().find(|&&a| a >= x_prime.rows()) {
        return Err(CgcError::IndexOutOfRange {
            index: a,
            num_nodes: x_prime.rows(),
            context: "subclass assignment".into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmentation::PoolOrigin;

    fn pool(rows: Vec<Vec<f64>>, labels: Vec<usize>, confidence: Vec<f64>, c: usize) -> AugmentedPool {
        let n = rows.len();
        AugmentedPool {
            embeddings: DenseMatrix::from_rows(&rows).unwrap(),
            labels,
            confidence,
            origin: (0..n).map(|node| PoolOrigin { node, depth: 0 }).collect(),
            num_classes: c,
            sampled: 0,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn balanced_plan() {
        let labels: Vec<usize> = (0..140).map(|i| i % 7).collect();
        assert_eq!(plan_labels(&labels, 7, 70).unwrap().sizes, vec![10; 7]);
    }

    #[test]
    fn floor_of_one_overrides_quota() {
        assert_eq!(plan_labels(&[0, 0, 0, 1], 2, 2).unwrap().sizes, vec![1, 1]);
    }

    #[test]
    fn n_prime_equal_to_classes() {
        assert_eq!(plan_labels(&[0, 0, 0, 0, 1, 2], 3, 3).unwrap().sizes, vec![1, 1, 1]);
        assert!(plan_labels(&[0, 1, 2], 3, 2).is_err());
    }

    #[test]
    fn remainder_ties_favor_lower_class() {
        assert_eq!(plan_labels(&[0, 1], 2, 3).unwrap().sizes, vec![2, 1]);
    }

    #[test]
    fn one_dimensional_two_clusters() {
        let pts = DenseMatrix::from_rows(&[vec![0.0], vec![10.0], vec![0.1], vec![10.1]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = kmeans(&pts, 2, &mut rng, Execution::Sequential).unwrap();
        let a = &fit.assignments;
        assert_eq!(a[0], a[2]);
        assert_eq!(a[1], a[3]);
        assert_ne!(a[0], a[1]);
        let mut cs = [fit.centroids[(0, 0)], fit.centroids[(1, 0)]];
        cs.sort_by(f64::total_cmp);
        assert!((cs[0] - 0.05).abs() < 1e-12 && (cs[1] - 10.05).abs() < 1e-12);
    }

    #[test]
    fn k_equals_points_gives_singletons() {
        let pts = DenseMatrix::from_fn(6, 2, |i, j| (i * i + j) as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let fit = kmeans(&pts, 6, &mut rng, Execution::Sequential).unwrap();
        let mut a = fit.assignments.clone();
        a.sort_unstable();
        assert_eq!(a, (0..6).collect::<Vec<_>>());
        assert_eq!(*fit.history.last().unwrap(), 0.0);
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let pts = DenseMatrix::from_rows(&vec![vec![1.0, 1.0]; 5]).unwrap();
        for method in [ClusterMethod::Kmeans, ClusterMethod::Random] {
            let a = cluster_class(&pts, 3, method, 2).unwrap();
            for c in 0..3 {
                assert!(a.contains(&c));
            }
        }
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let pts = DenseMatrix::zeros(2, 1);
        let err = cluster_class(&pts, 3, ClusterMethod::Kmeans, 0).unwrap_err();
        assert!(err.to_string().contains("raise the augmentation percentage"));
    }

    #[test]
    fn lloyd_objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts = DenseMatrix::from_fn(100, 8, |_, _| rng.random::<f64>());
        let fit = kmeans(&pts, 7, &mut rng, Execution::Parallel).unwrap();
        for w in fit.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn uniform_subclass_is_plain_mean() {
        let p = pool(vec![vec![0.0, 0.0], vec![2.0, 2.0]], vec![0, 0], vec![0.3, 0.9], 1);
        let plan = CondensedLabelPlan { sizes: vec![1] };
        let out = aggregate(&p, &plan, &[0, 0], 1.0, Weighting::Uniform).unwrap();
        assert_eq!(out.h_prime.as_slice(), &[1.0, 1.0]);
        assert_eq!(out.objective, 4.0);
    }

    #[test]
    fn softmax_temperature_limits() {
        let hot = subclass_weights(&[1.0, 0.0], 1e9, Weighting::Softmax);
        assert!((hot[0] - 0.5).abs() < 1e-8);
        let cold = subclass_weights(&[1.0, 0.0], 0.1, Weighting::Softmax);
        assert!(cold[0] > 0.9999);
    }

    #[test]
    fn linear_mode_ignores_tau() {
        let r = [0.2, 0.7, 0.1];
        assert_eq!(
            subclass_weights(&r, 1.0, Weighting::Linear),
            subclass_weights(&r, 10.0, Weighting::Linear)
        );
        assert_eq!(subclass_weights(&[0.0, 0.0], 1.0, Weighting::Linear), vec![0.5, 0.5]);
    }

    #[test]
    fn cross_class_assignment_rejected() {
        let p = pool(vec![vec![0.0], vec![1.0]], vec![0, 1], vec![1.0, 1.0], 2);
        let plan = CondensedLabelPlan { sizes: vec![1, 1] };
        assert!(aggregate(&p, &plan, &[1, 0], 1.0, Weighting::Uniform).is_err());
    }

    #[test]
    fn dm_objective_vanishes_at_uniform_centroids() {
        let p = pool(
            vec![vec![0.0], vec![1.0], vec![4.0], vec![6.0]],
            vec![0, 0, 1, 1],
            vec![0.5; 4],
            2,
        );
        let plan = CondensedLabelPlan { sizes: vec![1, 1] };
        let out = aggregate(&p, &plan, &[0, 0, 1, 1], 1.0, Weighting::Uniform).unwrap();
        assert_eq!(out.h_prime.as_slice(), &[0.5, 5.0]);
        assert_eq!(simplified_dm_objective(&out.h_prime, &out.assignments, &p).unwrap(), 0.0);
        let shifted = out.h_prime.map(|x| x + 1.0);
        assert_eq!(simplified_dm_objective(&shifted, &out.assignments, &p).unwrap(), 2.0);
    }
}
