//! Error-weighted sampling of shallow propagated rows into the partition pool.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::assessment::Assessment;
use crate::error::{CgcError, Result};
use crate::matrix::DenseMatrix;
use crate::propagation::PropagationStack;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PoolOrigin {
    pub node: usize,
    pub depth: usize,
}

/// Rows to be partitioned: all training rows of `H(K)` first, then sampled
/// shallower rows in sampling order.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPool {
    pub embeddings: DenseMatrix,
    pub labels: Vec<usize>,
    pub confidence: Vec<f64>,
    pub origin: Vec<PoolOrigin>,
    pub num_classes: usize,
    /// Number of sampled (non-base) rows.
    pub sampled: usize,
    pub warnings: Vec<String>,
}

impl AugmentedPool {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Pool row indices grouped by class.
    pub fn rows_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (r, &y) in self.labels.iter().enumerate() {
            out[y].push(r);
        }
        out
    }

    /// Per-class counts of pool rows.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_classes];
        for &y in &self.labels {
            out[y] += 1;
        }
        out
    }
}

/// `round(p / 100 * n_train)`.
pub fn sample_count(p: f64, n_train: usize) -> usize {
    (p / 100.0 * n_train as f64).round() as usize
}

/// Weighted sampling without replacement by exponential keys: each item with
/// positive weight gets `Exp(1) / w`, and the `m` smallest keys win, returned in
/// ascending key order. Zero-weight items are never drawn.
pub fn weighted_sample<R: Rng>(weights: &[f64], m: usize, rng: &mut R) -> Vec<usize> {
    let mut keys: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .filter_map(|(i, &w)| {
            let e: f64 = rng.sample(Exp1);
            (w > 0.0).then_some((e / w, i))
        })
        .collect();
    let m = m.min(keys.len());
    if m == 0 {
        return Vec::new();
    }
    keys.select_nth_unstable_by(m - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keys.truncate(m);
    keys.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keys.into_iter().map(|(_, i)| i).collect()
}

/// Builds the pool from the assessed training nodes. `p` is a percentage of the
/// training set size; candidates are training rows at depths `0..K`, weighted
/// by the smoothed error of their class.
pub fn augment(
    stack: &PropagationStack,
    assess: &Assessment,
    p: f64,
    seed_value: u64,
) -> Result<AugmentedPool> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(CgcError::InvalidArgument(format!(
            "augmentation percentage must be finite and >= 0, got {p}"
        )));
    }
    let depth = stack.depth();
    if depth != assess.depth {
        return Err(CgcError::DimensionMismatch {
            context: "assessment depth vs stack depth",
            expected: depth,
            actual: assess.depth,
        });
    }
    if p > 0.0 && depth == 0 {
        return Err(CgcError::InvalidArgument(
            "augmentation needs propagation depth >= 1".into(),
        ));
    }
    let train = &assess.train;
    let n_train = train.len();
    let requested = sample_count(p, n_train);
    let candidates = n_train * depth;
    let mut warnings = Vec::new();
    let m = if requested > candidates {
        let msg = format!(
            "augmentation requested {requested} rows but only {candidates} candidates exist; clamped"
        );
        log::warn!("{msg}");
        warnings.push(msg);
        candidates
    } else {
        requested
    };

    // Candidate c = t * K + l for training position t and depth l < K.
    let weights: Vec<f64> = (0..candidates)
        .map(|c| assess.class_errors[assess.train_labels[c / depth.max(1)]])
        .collect();
    let mut rng = seed::rng(seed_value, seed::stream::AUGMENT);
    let picked = if m > 0 {
        weighted_sample(&weights, m, &mut rng)
    } else {
        Vec::new()
    };

    let d = stack.layer(0).cols();
    let total = n_train + picked.len();
    let mut embeddings = DenseMatrix::zeros(total, d);
    let mut labels = Vec::with_capacity(total);
    let mut confidence = Vec::with_capacity(total);
    let mut origin = Vec::with_capacity(total);
    let last = stack.last();
    for (t, &node) in train.iter().enumerate() {
        embeddings.row_mut(t).copy_from_slice(last.row(node));
        labels.push(assess.train_labels[t]);
        confidence.push(assess.confidence_at(t, depth));
        origin.push(PoolOrigin { node, depth });
    }
    for (r, &c) in picked.iter().enumerate() {
        let (t, l) = (c / depth, c % depth);
        let node = train[t];
        embeddings
            .row_mut(n_train + r)
            .copy_from_slice(stack.layer(l).row(node));
        labels.push(assess.train_labels[t]);
        confidence.push(assess.confidence_at(t, l));
        origin.push(PoolOrigin { node, depth: l });
    }
    Ok(AugmentedPool {
        embeddings,
        labels,
        confidence,
        origin,
        num_classes: assess.num_classes,
        sampled: picked.len(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assessment::fit_probe;
    use crate::graph::SparseAdjacency;
    use crate::par::Execution;
    use crate::propagation::{propagate_with, PropagationRule};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn fixture(n: usize, depth: usize) -> (PropagationStack, Assessment) {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let adj = SparseAdjacency::from_undirected_edges(n, edges).unwrap();
        let x = DenseMatrix::from_fn(n, 3, |i, j| ((i * 5 + j * 2) % 7) as f64);
        let stack = propagate_with(&adj, &x, depth, PropagationRule::Sgc, Execution::Sequential).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let train: Vec<usize> = (0..n).collect();
        let assess = fit_probe(&stack, &labels, 2, &train).unwrap();
        (stack, assess)
    }

    #[test]
    fn zero_percent_is_base_pool() {
        let (stack, assess) = fixture(10, 2);
        let pool = augment(&stack, &assess, 0.0, 1).unwrap();
        assert_eq!(pool.embeddings, stack.last().select_rows(&assess.train));
        assert_eq!(pool.sampled, 0);
        assert!(pool.origin.iter().all(|o| o.depth == 2));
    }

    #[test]
    fn fifty_percent_of_ten_is_five_and_deterministic() {
        let (stack, assess) = fixture(10, 2);
        let a = augment(&stack, &assess, 50.0, 9).unwrap();
        let b = augment(&stack, &assess, 50.0, 9).unwrap();
        assert_eq!(a.sampled, 5);
        assert_eq!(a.len(), 15);
        assert_eq!(a, b);
        let unique: HashSet<_> = a.origin.iter().collect();
        assert_eq!(unique.len(), a.len());
        assert!(a.origin[10..].iter().all(|o| o.depth < 2));
    }

    #[test]
    fn oversized_request_is_clamped_with_warning() {
        let (stack, assess) = fixture(4, 1);
        let pool = augment(&stack, &assess, 500.0, 0).unwrap();
        assert_eq!(pool.sampled, 4);
        assert_eq!(pool.warnings.len(), 1);
    }

    #[test]
    fn depth_zero_with_augmentation_is_rejected() {
        let (stack, assess) = fixture(4, 0);
        assert!(augment(&stack, &assess, 10.0, 0).is_err());
        assert!(augment(&stack, &assess, 0.0, 0).is_ok());
    }

    #[test]
    fn dominant_weight_class_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let weights = [1.0, 1.0, 1.0, 1e-9, 1e-9, 1e-9];
        let mut hits = 0;
        for _ in 0..200 {
            hits += weighted_sample(&weights, 3, &mut rng).iter().filter(|&&i| i < 3).count();
        }
        assert!(hits >= 599);
        assert_eq!(weighted_sample(&weights, 6, &mut rng).len(), 6);
    }

    #[test]
    fn single_draw_frequencies_follow_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let trials = 10_000;
        let first = (0..trials)
            .filter(|_| weighted_sample(&[0.8, 0.2], 1, &mut rng) == [0])
            .count();
        let freq = first as f64 / trials as f64;
        assert!((freq - 0.8).abs() <= 0.03, "freq {freq}");
    }
}
