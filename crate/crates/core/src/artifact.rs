//! Condensed graphs on disk: the dataset directory layout plus
//! `provenance.json`.
//!
//! Every condensed node is a training node, so `train.u32` lists all of them
//! and the other masks are empty. Missing adjacency files mean identity
//! structure.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::error::{CgcError, Result};
use crate::io::{read_directory, read_json, write_directory, write_json, Meta, FORMAT_VERSION};
use crate::pipeline::{PipelineConfig, Preset};
use crate::structure::{CondensedGraph, GenParams, Structure};

pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: f64,
}

/// Keys of `provenance.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Resolved configuration; rerunning it reproduces the artifact.
    pub config: PipelineConfig,
    pub master_seed: u64,
    pub preset: Preset,
    pub stage_ms: Vec<StageTiming>,
    pub toolkit_version: String,
    pub warnings: Vec<String>,
    /// Squared distance of pool rows to their condensed node.
    pub partition_objective: f64,
    pub gen_params: Option<GenParams>,
}

impl Provenance {
    pub fn total_ms(&self) -> f64 {
        self.stage_ms.iter().map(|s| s.ms).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensedArtifact {
    pub graph: CondensedGraph,
    pub provenance: Provenance,
}

pub fn write_artifact(art: &CondensedArtifact, dir: &Path) -> Result<()> {
    let g = &art.graph;
    let meta = Meta {
        num_nodes: g.num_nodes(),
        num_features: g.features.cols(),
        num_classes: g.num_classes,
        task: Task::Transductive,
        format_version: FORMAT_VERSION,
    };
    let all: Vec<usize> = (0..g.num_nodes()).collect();
    write_directory(dir, &meta, &g.features, g.adjacency(), &g.labels, [&all, &[], &[]])?;
    write_json(&dir.join(PROVENANCE_FILE), &art.provenance)
}

/// Features come back as stored, i.e. rounded to 32-bit floats.
pub fn read_artifact(dir: &Path) -> Result<CondensedArtifact> {
    let raw = read_directory(dir)?;
    let provenance: Provenance = read_json(&dir.join(PROVENANCE_FILE))?;
    if let Some(&y) = raw.labels.iter().find(|&&y| y >= raw.meta.num_classes) {
        return Err(CgcError::Structure(format!(
            "condensed label {y} outside [0, {})",
            raw.meta.num_classes
        )));
    }
    let structure = match raw.adjacency {
        Some(a) => {
            a.check_symmetric()?;
            Structure::Adjacency(a)
        }
        None => Structure::Identity,
    };
    Ok(CondensedArtifact {
        graph: CondensedGraph {
            labels: raw.labels,
            num_classes: raw.meta.num_classes,
            features: raw.features,
            structure,
            gen_params: provenance.gen_params,
        },
        provenance,
    })
}
