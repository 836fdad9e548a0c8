//! Non-parametric feature smoothing over the normalized graph.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CgcError, Result};
use crate::graph::{normalize, SparseAdjacency, SparseOperator};
use crate::matrix::DenseMatrix;
use crate::par::Execution;

pub const DEFAULT_DEPTH: usize = 2;
pub const DEFAULT_PPR_BETA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PropagationRule {
    /// `H(l+1) = Â H(l)`
    #[default]
    Sgc,
    /// `H(l+1) = (1 - beta) Â H(l) + beta X`
    Ppr { beta: f64 },
    /// `H(l+1) = mean over the closed neighborhood of H(l)`
    Mean,
}

impl std::fmt::Display for PropagationRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PropagationRule::Sgc => f.write_str("sgc"),
            PropagationRule::Ppr { beta } => write!(f, "ppr({beta})"),
            PropagationRule::Mean => f.write_str("mean"),
        }
    }
}

/// `layers[l]` is `H(l)`; `layers[0]` is the input features.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationStack {
    pub rule: PropagationRule,
    layers: Vec<DenseMatrix>,
}

impl PropagationStack {
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layers(&self) -> &[DenseMatrix] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &DenseMatrix {
        &self.layers[l]
    }

    /// `H(K)`.
    pub fn last(&self) -> &DenseMatrix {
        self.layers.last().expect("stack has at least one layer")
    }

    pub fn into_layers(self) -> Vec<DenseMatrix> {
        self.layers
    }
}

pub fn propagate(ds: &Dataset, depth: usize, rule: PropagationRule) -> Result<PropagationStack> {
    propagate_with(&ds.adjacency, &ds.features, depth, rule, Execution::default())
}

pub fn propagate_with(
    adj: &SparseAdjacency,
    features: &DenseMatrix,
    depth: usize,
    rule: PropagationRule,
    exec: Execution,
) -> Result<PropagationStack> {
    if features.rows() != adj.num_nodes() {
        return Err(CgcError::DimensionMismatch {
            context: "propagation features vs nodes",
            expected: adj.num_nodes(),
            actual: features.rows(),
        });
    }
    if let PropagationRule::Ppr { beta } = rule {
        if !(0.0..=1.0).contains(&beta) {
            return Err(CgcError::InvalidArgument(format!(
                "ppr beta must lie in [0, 1], got {beta}"
            )));
        }
    }
    let op = match rule {
        PropagationRule::Mean => SparseOperator::mean_aggregation(adj),
        _ => normalize(adj)?.operator().clone(),
    };
    let mut layers = Vec::with_capacity(depth + 1);
    layers.push(features.clone());
    for _ in 0..depth {
        let mut next = op.apply(layers.last().unwrap(), exec)?;
        if let PropagationRule::Ppr { beta } = rule {
            for (h, x) in next.as_mut_slice().iter_mut().zip(features.as_slice()) {
                *h = (1.0 - beta) * *h + beta * x;
            }
        }
        layers.push(next);
    }
    Ok(PropagationStack { rule, layers })
}

/// `op^K x` without keeping intermediates.
pub fn power_apply(
    op: &SparseOperator,
    x: &DenseMatrix,
    depth: usize,
    exec: Execution,
) -> Result<DenseMatrix> {
    let mut h = x.clone();
    for _ in 0..depth {
        h = op.apply(&h, exec)?;
    }
    Ok(h)
}
