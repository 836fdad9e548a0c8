//! Labeled attributed graphs with train/val/test splits.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{CgcError, Result};
use crate::graph::SparseAdjacency;
use crate::matrix::DenseMatrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Transductive,
    Inductive,
}

impl std::str::FromStr for Task {
    type Err = CgcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transductive" => Ok(Task::Transductive),
            "inductive" => Ok(Task::Inductive),
            other => Err(CgcError::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Transductive => "transductive",
            Task::Inductive => "inductive",
        })
    }
}

/// Node labels in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledNodes {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledNodes {
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(CgcError::Structure(format!(
                "label {l} of node {i} outside [0, {num_classes})"
            )));
        }
        Ok(Self {
            labels,
            num_classes,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn one_hot(&self) -> DenseMatrix {
        one_hot(&self.labels, self.num_classes)
    }

    /// Per-class counts over the given nodes.
    pub fn class_counts(&self, nodes: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &i in nodes {
            counts[self.labels[i]] += 1;
        }
        counts
    }
}

pub fn one_hot(labels: &[usize], num_classes: usize) -> DenseMatrix {
    let mut y = DenseMatrix::zeros(labels.len(), num_classes);
    for (i, &l) in labels.iter().enumerate() {
        y[(i, l)] = 1.0;
    }
    y
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub adjacency: SparseAdjacency,
    pub features: DenseMatrix,
    pub labels: LabeledNodes,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub task: Task,
}

impl Dataset {
    /// Validates shapes, mask ranges, mask disjointness, and that every class
    /// has at least one training node.
    pub fn new(
        adjacency: SparseAdjacency,
        features: DenseMatrix,
        labels: LabeledNodes,
        mut train: Vec<usize>,
        mut val: Vec<usize>,
        mut test: Vec<usize>,
        task: Task,
    ) -> Result<Self> {
        let n = adjacency.num_nodes();
        if features.rows() != n {
            return Err(CgcError::DimensionMismatch {
                context: "feature rows vs nodes",
                expected: n,
                actual: features.rows(),
            });
        }
        if labels.len() != n {
            return Err(CgcError::DimensionMismatch {
                context: "labels vs nodes",
                expected: n,
                actual: labels.len(),
            });
        }
        let mut owner: Vec<Option<&'static str>> = vec![None; n];
        for (name, mask) in [("train", &mut train), ("val", &mut val), ("test", &mut test)] {
            mask.sort_unstable();
            for &i in mask.iter() {
                if i >= n {
                    return Err(CgcError::IndexOutOfRange {
                        index: i,
                        num_nodes: n,
                        context: format!("{name} mask"),
                    });
                }
                if let Some(first) = owner[i] {
                    return Err(CgcError::MaskOverlap {
                        node: i,
                        first,
                        second: name,
                    });
                }
                owner[i] = Some(name);
            }
        }
        let counts = labels.class_counts(&train);
        if let Some(class) = counts.iter().position(|&c| c == 0) {
            return Err(CgcError::MissingClass { class });
        }
        Ok(Self {
            adjacency,
            features,
            labels,
            train,
            val,
            test,
            task,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.num_nodes()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.num_classes()
    }

    pub fn train_labels(&self) -> Vec<usize> {
        self.train.iter().map(|&i| self.labels.get(i)).collect()
    }

    /// The graph the condenser sees: the full graph for transductive tasks,
    /// the train-induced subgraph for inductive ones.
    pub fn condensation_input(&self) -> Result<Dataset> {
        match self.task {
            Task::Transductive => Ok(self.clone()),
            Task::Inductive => induced_subgraph(self, &self.train),
        }
    }

    /// Replaces the splits with a stratified one: `train_per_class` and
    /// `val_per_class` nodes per class, the remainder becoming test nodes.
    pub fn resplit_per_class(
        &self,
        train_per_class: usize,
        val_per_class: usize,
        seed_value: u64,
    ) -> Result<Dataset> {
        let mut rng = seed::rng(seed_value, seed::stream::SPLIT);
        let c = self.num_classes();
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
        for (i, &l) in self.labels.labels().iter().enumerate() {
            by_class[l].push(i);
        }
        let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
        for nodes in &mut by_class {
            nodes.shuffle(&mut rng);
            let t = train_per_class.min(nodes.len());
            let v = val_per_class.min(nodes.len() - t);
            train.extend_from_slice(&nodes[..t]);
            val.extend_from_slice(&nodes[t..t + v]);
            test.extend_from_slice(&nodes[t + v..]);
        }
        Dataset::new(
            self.adjacency.clone(),
            self.features.clone(),
            self.labels.clone(),
            train,
            val,
            test,
            self.task,
        )
    }
}

/// Subgraph on `nodes`, relabeled in ascending node order. An edge survives iff
/// both endpoints are kept; masks are restricted to the kept nodes.
pub fn induced_subgraph(ds: &Dataset, nodes: &[usize]) -> Result<Dataset> {
    if nodes.is_empty() {
        return Err(CgcError::InvalidArgument(
            "induced_subgraph needs at least one node".into(),
        ));
    }
    let n = ds.num_nodes();
    let mut keep: Vec<usize> = nodes.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&i| i >= n) {
        return Err(CgcError::IndexOutOfRange {
            index: bad,
            num_nodes: n,
            context: "induced_subgraph node set".into(),
        });
    }
    let mut new_id = vec![usize::MAX; n];
    for (k, &i) in keep.iter().enumerate() {
        new_id[i] = k;
    }
    let adj = &ds.adjacency;
    let mut triplets = Vec::new();
    for &i in &keep {
        let s = adj.row_offsets()[i];
        for (k, &j) in adj.neighbors(i).iter().enumerate() {
            if new_id[j] != usize::MAX {
                triplets.push((new_id[i], new_id[j], adj.weight_at(s + k)));
            }
        }
    }
    let sub_adj = if adj.values().is_none() {
        SparseAdjacency::from_undirected_edges(
            keep.len(),
            triplets.into_iter().filter(|t| t.0 < t.1).map(|t| (t.0, t.1)),
        )?
    } else {
        SparseAdjacency::from_triplets(keep.len(), triplets)?
    };
    let remap = |mask: &[usize]| -> Vec<usize> {
        mask.iter()
            .filter(|&&i| new_id[i] != usize::MAX)
            .map(|&i| new_id[i])
            .collect()
    };
    let labels = LabeledNodes::new(
        keep.iter().map(|&i| ds.labels.get(i)).collect(),
        ds.num_classes(),
    )?;
    // Built without Dataset::new: a subset may legitimately miss classes in train.
    let mut train = remap(&ds.train);
    let mut val = remap(&ds.val);
    let mut test = remap(&ds.test);
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Dataset {
        adjacency: sub_adj,
        features: ds.features.select_rows(&keep),
        labels,
        train,
        val,
        test,
        task: ds.task,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Dataset {
        let adj = SparseAdjacency::from_undirected_edges(4, [(0, 1), (1, 2), (0, 2)]).unwrap();
        Dataset::new(
            adj,
            DenseMatrix::from_fn(4, 2, |i, j| (i + j) as f64),
            LabeledNodes::new(vec![0, 1, 0, 1], 2).unwrap(),
            vec![0, 1],
            vec![2],
            vec![3],
            Task::Transductive,
        )
        .unwrap()
    }

    #[test]
    fn full_node_set_is_identity() {
        let ds = triangle();
        let sub = induced_subgraph(&ds, &[3, 2, 1, 0]).unwrap();
        assert_eq!(sub, ds);
    }

    #[test]
    fn triangle_keep_two_nodes() {
        let sub = induced_subgraph(&triangle(), &[0, 1]).unwrap();
        assert_eq!(sub.num_nodes(), 2);
        assert_eq!(sub.adjacency.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(sub.train, vec![0, 1]);
        assert!(sub.val.is_empty());
    }

    #[test]
    fn isolated_node_subgraph() {
        let sub = induced_subgraph(&triangle(), &[3]).unwrap();
        assert_eq!(sub.num_nodes(), 1);
        assert_eq!(sub.adjacency.nnz(), 0);
        assert_eq!(sub.test, vec![0]);
    }

    #[test]
    fn empty_node_set_errors() {
        assert!(induced_subgraph(&triangle(), &[]).is_err());
    }

    #[test]
    fn overlapping_masks_rejected() {
        let ds = triangle();
        let err = Dataset::new(
            ds.adjacency.clone(),
            ds.features.clone(),
            ds.labels.clone(),
            vec![0, 1],
            vec![1],
            vec![],
            Task::Transductive,
        )
        .unwrap_err();
        assert!(matches!(err, CgcError::MaskOverlap { node: 1, .. }));
    }

    #[test]
    fn class_missing_from_train_rejected() {
        let ds = triangle();
        let err = Dataset::new(
            ds.adjacency.clone(),
            ds.features.clone(),
            ds.labels.clone(),
            vec![0],
            vec![],
            vec![],
            Task::Transductive,
        )
        .unwrap_err();
        assert!(matches!(err, CgcError::MissingClass { class: 1 }));
    }

    #[test]
    fn inductive_input_is_train_subgraph() {
        let mut ds = triangle();
        ds.task = Task::Inductive;
        let input = ds.condensation_input().unwrap();
        assert_eq!(input.num_nodes(), 2);
        assert_eq!(input.train, vec![0, 1]);
    }
}
