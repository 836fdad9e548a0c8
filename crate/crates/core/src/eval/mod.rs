//! Utility of a condensed graph, measured on the original graph's test nodes.

pub mod gcn;
pub mod ridge;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CgcError, Result};
use crate::structure::CondensedGraph;

pub use gcn::{train_gcn2, train_gcn2_whole};
pub use ridge::{eval_sgc_ridge, eval_sgc_ridge_whole};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalModel {
    SgcRidge,
    #[default]
    Gcn2,
}

impl std::str::FromStr for EvalModel {
    type Err = CgcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgc_ridge" => Ok(EvalModel::SgcRidge),
            "gcn2" => Ok(EvalModel::Gcn2),
            other => Err(CgcError::InvalidArgument(format!("unknown model {other:?}"))),
        }
    }
}

impl std::fmt::Display for EvalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalModel::SgcRidge => "sgc_ridge",
            EvalModel::Gcn2 => "gcn2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub model: EvalModel,
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Ridge strength for `sgc_ridge`.
    pub ridge: f64,
    /// Propagation depth for `sgc_ridge`.
    pub depth: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            model: EvalModel::Gcn2,
            hidden: 256,
            lr: 0.01,
            weight_decay: 5e-4,
            dropout: 0.5,
            epochs: 600,
            repeats: 5,
            seed: 0,
            ridge: 1e-2,
            depth: 2,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(CgcError::InvalidArgument("repeats must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(CgcError::InvalidArgument(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) || !(self.ridge >= 0.0) {
            return Err(CgcError::InvalidArgument(
                "lr must be > 0; weight_decay and ridge must be >= 0".into(),
            ));
        }
        if self.hidden == 0 {
            return Err(CgcError::InvalidArgument("hidden must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: EvalModel,
    /// Test accuracy of each successful repeat.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `accuracies`.
    pub std: f64,
    /// Wall clock of each attempted repeat.
    pub wall_ms: Vec<f64>,
    /// Repeats aborted because the loss became non-finite.
    pub failed_repeats: Vec<usize>,
}

impl EvalReport {
    pub fn from_runs(model: EvalModel, runs: Vec<(Option<f64>, f64)>) -> Self {
        let mut accuracies = Vec::new();
        let mut wall_ms = Vec::new();
        let mut failed_repeats = Vec::new();
        for (r, (acc, ms)) in runs.into_iter().enumerate() {
            wall_ms.push(ms);
            match acc {
                Some(a) => accuracies.push(a),
                None => failed_repeats.push(r),
            }
        }
        let (mean, std) = mean_std(&accuracies);
        Self {
            model,
            accuracies,
            mean,
            std,
            wall_ms,
            failed_repeats,
        }
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fraction of `nodes` whose prediction equals the label.
pub fn accuracy(pred: &[usize], labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return f64::NAN;
    }
    let hits = nodes.iter().filter(|&&i| pred[i] == labels[i]).count();
    hits as f64 / nodes.len() as f64
}

pub fn evaluate(graph: &CondensedGraph, original: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    match cfg.model {
        EvalModel::SgcRidge => eval_sgc_ridge(graph, original, cfg.depth, cfg.ridge),
        EvalModel::Gcn2 => train_gcn2(graph, original, cfg),
    }
}

/// Trains on the original graph's own training nodes.
pub fn evaluate_whole(original: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    match cfg.model {
        EvalModel::SgcRidge => eval_sgc_ridge_whole(original, cfg.depth, cfg.ridge),
        EvalModel::Gcn2 => train_gcn2_whole(original, cfg),
    }
}

fn check_compatible(graph: &CondensedGraph, original: &Dataset) -> Result<()> {
    if graph.features.cols() != original.num_features() {
        return Err(CgcError::DimensionMismatch {
            context: "condensed vs original feature width",
            expected: original.num_features(),
            actual: graph.features.cols(),
        });
    }
    if graph.num_classes != original.num_classes() {
        return Err(CgcError::DimensionMismatch {
            context: "condensed vs original classes",
            expected: original.num_classes(),
            actual: graph.num_classes,
        });
    }
    Ok(())
}
