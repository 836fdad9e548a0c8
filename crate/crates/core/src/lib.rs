//! Training-free graph condensation.
//!
//! The pipeline propagates node features over the normalized graph, augments
//! the training pool with hard-class propagated rows, partitions each class
//! into clusters, aggregates cluster members into synthetic nodes, and
//! optionally builds a structure for the condensed graph.

pub mod artifact;
pub mod assessment;
pub mod augmentation;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod matrix;
pub mod par;
pub mod partition;
pub mod pipeline;
pub mod propagation;
pub mod seed;
pub mod structure;
pub mod synth;
pub mod theory;

pub use dataset::{Dataset, LabeledNodes, Task};
pub use error::{CgcError, Result};
pub use graph::{normalize, spmm, NormalizedAdjacency, SparseAdjacency};
pub use matrix::{CsrMatrix, DenseMatrix};
pub use par::Execution;
