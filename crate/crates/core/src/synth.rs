//! Stochastic block model fixtures with Gaussian class centers.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};

use crate::dataset::{Dataset, LabeledNodes, Task};
use crate::error::{CgcError, Result};
use crate::graph::SparseAdjacency;
use crate::matrix::DenseMatrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmParams {
    pub classes: usize,
    pub nodes_per_class: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub d: usize,
    pub class_center_scale: f64,
}

/// Node `i` belongs to class `i / nodes_per_class`. Edges are drawn block by
/// block with geometric skips, so the cost is linear in nodes plus edges.
/// Features are `scale * center[class] + noise`, all entries standard normal.
/// Splits are 60/20/20 per class.
pub fn synth_sbm(params: SbmParams, seed_value: u64) -> Result<Dataset> {
    let SbmParams {
        classes,
        nodes_per_class,
        p_in,
        p_out,
        d,
        class_center_scale,
    } = params;
    if classes == 0 || nodes_per_class == 0 || d == 0 {
        return Err(CgcError::InvalidArgument(format!(
            "degenerate SBM: classes={classes}, nodes_per_class={nodes_per_class}, d={d}"
        )));
    }
    if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
        return Err(CgcError::InvalidArgument(format!(
            "SBM needs 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    if !class_center_scale.is_finite() {
        return Err(CgcError::InvalidArgument("class_center_scale must be finite".into()));
    }
    let n = classes * nodes_per_class;

    let mut rng = seed::rng(seed_value, seed::stream::SBM_GRAPH);
    let mut edges = Vec::new();
    for u in 0..n {
        let cu = u / nodes_per_class;
        for b in cu..classes {
            let (start, p) = if b == cu {
                (u + 1, p_in)
            } else {
                (b * nodes_per_class, p_out)
            };
            sample_run(&mut rng, start, (b + 1) * nodes_per_class, p, |v| {
                edges.push((u, v))
            });
        }
    }
    let adjacency = SparseAdjacency::from_undirected_edges(n, edges)?;

    let mut rng = seed::rng(seed_value, seed::stream::SBM_FEATURES);
    let centers: Vec<f64> = (0..classes * d)
        .map(|_| class_center_scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut features = DenseMatrix::zeros(n, d);
    for i in 0..n {
        let c = i / nodes_per_class;
        for (j, x) in features.row_mut(i).iter_mut().enumerate() {
            *x = centers[c * d + j] + rng.sample::<f64, _>(StandardNormal);
        }
    }

    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..classes {
        let mut nodes: Vec<usize> = (c * nodes_per_class..(c + 1) * nodes_per_class).collect();
        nodes.shuffle(&mut rng);
        let t = ((0.6 * nodes_per_class as f64).round() as usize).max(1);
        let v = ((0.2 * nodes_per_class as f64).round() as usize).min(nodes_per_class - t);
        train.extend_from_slice(&nodes[..t]);
        val.extend_from_slice(&nodes[t..t + v]);
        test.extend_from_slice(&nodes[t + v..]);
    }
    let labels = LabeledNodes::new((0..n).map(|i| i / nodes_per_class).collect(), classes)?;
    Dataset::new(adjacency, features, labels, train, val, test, Task::Transductive)
}

/// Calls `emit(v)` for each `v` in `start..end` independently with probability `p`.
fn sample_run<R: Rng>(rng: &mut R, start: usize, end: usize, p: f64, mut emit: impl FnMut(usize)) {
    if p <= 0.0 || start >= end {
        return;
    }
    if p >= 1.0 {
        (start..end).for_each(emit);
        return;
    }
    let skip = Geometric::new(p).expect("p in (0, 1)");
    let mut v = start;
    loop {
        let gap = skip.sample(rng);
        match usize::try_from(gap).ok().and_then(|g| v.checked_add(g)) {
            Some(next) if next < end => {
                emit(next);
                v = next + 1;
            }
            _ => break,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p_in: f64, p_out: f64) -> SbmParams {
        SbmParams {
            classes: 2,
            nodes_per_class: 3,
            p_in,
            p_out,
            d: 4,
            class_center_scale: 1.0,
        }
    }

    #[test]
    fn extreme_probabilities_give_two_cliques() {
        let ds = synth_sbm(params(1.0, 0.0), 3).unwrap();
        let edges: Vec<_> = ds.adjacency.edges().collect();
        assert_eq!(edges, vec![(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]);
    }

    #[test]
    fn deterministic_under_seed() {
        let p = SbmParams {
            classes: 3,
            nodes_per_class: 40,
            p_in: 0.2,
            p_out: 0.01,
            d: 5,
            class_center_scale: 2.0,
        };
        assert_eq!(synth_sbm(p, 11).unwrap(), synth_sbm(p, 11).unwrap());
        assert_ne!(synth_sbm(p, 11).unwrap(), synth_sbm(p, 12).unwrap());
    }

    #[test]
    fn stratified_split_sizes() {
        let p = SbmParams {
            nodes_per_class: 10,
            ..params(0.5, 0.1)
        };
        let ds = synth_sbm(p, 0).unwrap();
        assert_eq!(ds.labels.class_counts(&ds.train), vec![6, 6]);
        assert_eq!(ds.labels.class_counts(&ds.val), vec![2, 2]);
        assert_eq!(ds.labels.class_counts(&ds.test), vec![2, 2]);
    }

    #[test]
    fn edge_density_matches_probability() {
        let p = SbmParams {
            classes: 1,
            nodes_per_class: 400,
            p_in: 0.05,
            p_out: 0.0,
            d: 1,
            class_center_scale: 0.0,
        };
        let ds = synth_sbm(p, 5).unwrap();
        let pairs = 400.0 * 399.0 / 2.0;
        let density = ds.adjacency.num_edges() as f64 / pairs;
        assert!((density - 0.05).abs() < 0.005, "density {density}");
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(synth_sbm(params(0.1, 0.1), 0).is_err());
        assert!(synth_sbm(params(1.5, 0.0), 0).is_err());
        assert!(synth_sbm(SbmParams { classes: 0, ..params(0.5, 0.1) }, 0).is_err());
        assert!(synth_sbm(SbmParams { d: 0, ..params(0.5, 0.1) }, 0).is_err());
    }
}
