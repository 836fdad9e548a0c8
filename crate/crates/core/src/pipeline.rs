//! End-to-end condensation: presets, configuration resolution and the staged
//! pipeline propagate → probe → augment → plan → partition → aggregate →
//! structure.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::artifact::{CondensedArtifact, Provenance, StageTiming};
use crate::assessment::fit_probe;
use crate::augmentation::augment;
use crate::dataset::Dataset;
use crate::error::{CgcError, Result};
use crate::par::Execution;
use crate::partition::{aggregate, partition_pool, plan_labels, ClusterMethod, Weighting};
use crate::propagation::{propagate_with, PropagationRule, DEFAULT_DEPTH};
use crate::structure::{
    make_graphless, make_with_adjacency, AdjacencyParams, DEFAULT_ALPHA, DEFAULT_THRESHOLD,
};

pub const DEFAULT_TAU: f64 = 1.0;
pub const DEFAULT_P: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Adjacency variant with solved features.
    Cgc,
    /// Graphless variant.
    #[default]
    CgcX,
    /// Plain per-class k-means with uniform means and no augmentation.
    Simdm,
    NoAug,
    NoCal,
    RandomPartition,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Cgc,
        Preset::CgcX,
        Preset::Simdm,
        Preset::NoAug,
        Preset::NoCal,
        Preset::RandomPartition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Cgc => "cgc",
            Preset::CgcX => "cgc_x",
            Preset::Simdm => "simdm",
            Preset::NoAug => "no_aug",
            Preset::NoCal => "no_cal",
            Preset::RandomPartition => "random_partition",
        }
    }

    /// Defaults with this preset's overrides applied.
    pub fn config(self) -> PipelineConfig {
        let mut c = PipelineConfig { preset: self, ..PipelineConfig::base() };
        match self {
            Preset::Cgc => c.structure = StructureKind::Adjacency,
            Preset::CgcX => {}
            Preset::Simdm => {
                c.p = 0.0;
                c.weighting = Weighting::Uniform;
                c.method = ClusterMethod::Kmeans;
            }
            Preset::NoAug => c.p = 0.0,
            Preset::NoCal => c.weighting = Weighting::Uniform,
            Preset::RandomPartition => c.method = ClusterMethod::Random,
        }
        c
    }
}

impl std::str::FromStr for Preset {
    type Err = CgcError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CgcError::InvalidArgument(format!("unknown preset {s:?}")))
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    #[default]
    Graphless,
    Adjacency,
}

/// How many condensed nodes to produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondensedSize {
    /// `N′ = round(r · N)` with `N` the size of the condensation input.
    Ratio(f64),
    Nodes(usize),
    /// `N′ = round(f · N_train)`.
    TrainFraction(f64),
}

impl Default for CondensedSize {
    fn default() -> Self {
        CondensedSize::TrainFraction(0.5)
    }
}

impl CondensedSize {
    pub fn resolve(self, num_nodes: usize, num_train: usize) -> Result<usize> {
        let scaled = |f: f64, n: usize, what: &str| {
            if !(f > 0.0 && f.is_finite()) {
                return Err(CgcError::InvalidArgument(format!("{what} must be finite and > 0, got {f}")));
            }
            Ok((f * n as f64).round() as usize)
        };
        match self {
            CondensedSize::Ratio(r) => scaled(r, num_nodes, "ratio"),
            CondensedSize::Nodes(n) => Ok(n),
            CondensedSize::TrainFraction(f) => scaled(f, num_train, "train fraction"),
        }
    }
}

/// Fully resolved pipeline settings; this is what provenance records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preset: Preset,
    pub size: CondensedSize,
    pub depth: usize,
    pub rule: PropagationRule,
    /// Augmentation percentage of the training set size.
    pub p: f64,
    pub tau: f64,
    pub weighting: Weighting,
    pub method: ClusterMethod,
    pub structure: StructureKind,
    pub threshold: f64,
    pub alpha: f64,
    /// `None` uses the trace-scaled default.
    pub jitter: Option<f64>,
    pub seed: u64,
}

impl PipelineConfig {
    fn base() -> Self {
        Self {
            preset: Preset::CgcX,
            size: CondensedSize::default(),
            depth: DEFAULT_DEPTH,
            rule: PropagationRule::Sgc,
            p: DEFAULT_P,
            tau: DEFAULT_TAU,
            weighting: Weighting::Softmax,
            method: ClusterMethod::Kmeans,
            structure: StructureKind::Graphless,
            threshold: DEFAULT_THRESHOLD,
            alpha: DEFAULT_ALPHA,
            jitter: None,
            seed: 0,
        }
    }

    pub fn preset(preset: Preset) -> Self {
        preset.config()
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Preset::default().config()
    }
}

/// Partial settings from a config file or command line. Later layers win;
/// the preset supplies everything left unset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigOverrides {
    pub preset: Option<Preset>,
    pub ratio: Option<f64>,
    pub nodes: Option<usize>,
    pub train_fraction: Option<f64>,
    pub depth: Option<usize>,
    pub rule: Option<PropagationRule>,
    pub p: Option<f64>,
    pub tau: Option<f64>,
    pub weighting: Option<Weighting>,
    pub method: Option<ClusterMethod>,
    pub structure: Option<StructureKind>,
    pub threshold: Option<f64>,
    pub alpha: Option<f64>,
    pub jitter: Option<f64>,
    pub seed: Option<u64>,
}

impl ConfigOverrides {
    fn size(&self) -> Result<Option<CondensedSize>> {
        let set = [self.ratio.is_some(), self.nodes.is_some(), self.train_fraction.is_some()];
        if set.iter().filter(|&&b| b).count() > 1 {
            return Err(CgcError::InvalidArgument(
                "set at most one of ratio, nodes, train_fraction".into(),
            ));
        }
        Ok(self
            .ratio
            .map(CondensedSize::Ratio)
            .or(self.nodes.map(CondensedSize::Nodes))
            .or(self.train_fraction.map(CondensedSize::TrainFraction)))
    }

    /// `self` overlaid with `top`; a size given in `top` replaces any size here.
    pub fn merge(self, top: ConfigOverrides) -> Result<ConfigOverrides> {
        let top_size = top.size()?.is_some();
        let mut out = ConfigOverrides {
            preset: top.preset.or(self.preset),
            depth: top.depth.or(self.depth),
            rule: top.rule.or(self.rule),
            p: top.p.or(self.p),
            tau: top.tau.or(self.tau),
            weighting: top.weighting.or(self.weighting),
            method: top.method.or(self.method),
            structure: top.structure.or(self.structure),
            threshold: top.threshold.or(self.threshold),
            alpha: top.alpha.or(self.alpha),
            jitter: top.jitter.or(self.jitter),
            seed: top.seed.or(self.seed),
            ratio: self.ratio,
            nodes: self.nodes,
            train_fraction: self.train_fraction,
        };
        if top_size {
            out.ratio = top.ratio;
            out.nodes = top.nodes;
            out.train_fraction = top.train_fraction;
        }
        Ok(out)
    }

    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = self.preset.unwrap_or_default().config();
        if let Some(s) = self.size()? {
            c.size = s;
        }
        macro_rules! take {
            ($($f:ident),+) => { $(if let Some(v) = self.$f { c.$f = v; })+ };
        }
        take!(depth, rule, p, tau, weighting, method, structure, threshold, alpha, seed);
        if self.jitter.is_some() {
            c.jitter = self.jitter;
        }
        Ok(c)
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub fn condense(ds: &Dataset, cfg: &PipelineConfig) -> Result<CondensedArtifact> {
    condense_with(ds, cfg, Execution::default())
}

/// Runs every stage and records wall-clock milliseconds per stage.
pub fn condense_with(ds: &Dataset, cfg: &PipelineConfig, exec: Execution) -> Result<CondensedArtifact> {
    let mut stage_ms = Vec::new();
    let mut time = |name: &str, start: Instant| stage_ms.push(StageTiming { stage: name.to_string(), ms: elapsed_ms(start) });

    let t = Instant::now();
    let input = ds.condensation_input()?;
    if input.train.is_empty() {
        return Err(CgcError::InvalidArgument("dataset has no training nodes".into()));
    }
    let n_prime = cfg.size.resolve(input.num_nodes(), input.train.len())?;
    time("prepare", t);

    let t = Instant::now();
    let stack = propagate_with(&input.adjacency, &input.features, cfg.depth, cfg.rule, exec)?;
    time("propagate", t);

    let t = Instant::now();
    let assess = fit_probe(&stack, input.labels.labels(), input.num_classes(), &input.train)?;
    time("assess", t);

    let t = Instant::now();
    let pool = augment(&stack, &assess, cfg.p, cfg.seed)?;
    drop(stack);
    time("augment", t);

    let t = Instant::now();
    let plan = plan_labels(&assess.train_labels, input.num_classes(), n_prime)?;
    let assignments = partition_pool(&pool, &plan, cfg.method, cfg.seed, exec)?;
    time("partition", t);

    let t = Instant::now();
    let part = aggregate(&pool, &plan, &assignments, cfg.tau, cfg.weighting)?;
    time("aggregate", t);

    let t = Instant::now();
    let graph = match cfg.structure {
        StructureKind::Graphless => make_graphless(part.h_prime, part.y_prime, input.num_classes())?,
        StructureKind::Adjacency => make_with_adjacency(
            &part.h_prime,
            part.y_prime,
            input.num_classes(),
            AdjacencyParams {
                threshold: cfg.threshold,
                alpha: cfg.alpha,
                depth: cfg.depth,
                jitter: cfg.jitter,
            },
            exec,
        )?,
    };
    time("structure", t);

    let provenance = Provenance {
        config: *cfg,
        master_seed: cfg.seed,
        preset: cfg.preset,
        stage_ms,
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        warnings: pool.warnings.clone(),
        partition_objective: part.objective,
        gen_params: graph.gen_params,
    };
    Ok(CondensedArtifact { graph, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Structure;
    use crate::synth::{synth_sbm, SbmParams};

    fn fixture() -> Dataset {
        synth_sbm(
            SbmParams {
                classes: 3,
                nodes_per_class: 40,
                p_in: 0.2,
                p_out: 0.02,
                d: 8,
                class_center_scale: 2.0,
            },
            11,
        )
        .unwrap()
    }

    #[test]
    fn presets_expand_as_documented() {
        let s = Preset::Simdm.config();
        assert_eq!((s.p, s.weighting, s.method, s.structure), (0.0, Weighting::Uniform, ClusterMethod::Kmeans, StructureKind::Graphless));
        assert_eq!(Preset::NoAug.config().p, 0.0);
        assert_eq!(Preset::NoCal.config().weighting, Weighting::Uniform);
        assert_eq!(Preset::RandomPartition.config().method, ClusterMethod::Random);
        assert_eq!(Preset::Cgc.config().structure, StructureKind::Adjacency);
        let d = PipelineConfig::default();
        assert_eq!((d.tau, d.p, d.alpha, d.threshold, d.depth), (1.0, 50.0, 1.0, 0.9, 2));
    }

    #[test]
    fn explicit_fields_beat_the_preset() {
        let o = ConfigOverrides { preset: Some(Preset::Simdm), p: Some(20.0), ..Default::default() };
        let c = o.resolve().unwrap();
        assert_eq!(c.p, 20.0);
        assert_eq!(c.weighting, Weighting::Uniform);
    }

    #[test]
    fn merge_prefers_top_layer() {
        let file = ConfigOverrides { ratio: Some(0.1), tau: Some(2.0), seed: Some(1), ..Default::default() };
        let flags = ConfigOverrides { nodes: Some(9), seed: Some(5), ..Default::default() };
        let c = file.merge(flags).unwrap().resolve().unwrap();
        assert_eq!(c.size, CondensedSize::Nodes(9));
        assert_eq!((c.tau, c.seed), (2.0, 5));
        let both = ConfigOverrides { ratio: Some(0.1), nodes: Some(3), ..Default::default() };
        assert!(both.resolve().is_err());
    }

    #[test]
    fn overrides_reject_unknown_keys() {
        assert!(serde_json::from_str::<ConfigOverrides>(r#"{"tua": 1.0}"#).is_err());
        let o: ConfigOverrides = serde_json::from_str(r#"{"preset": "cgc", "rule": {"kind": "ppr", "beta": 0.2}}"#).unwrap();
        assert_eq!(o.resolve().unwrap().rule, PropagationRule::Ppr { beta: 0.2 });
    }

    #[test]
    fn size_resolution() {
        assert_eq!(CondensedSize::Ratio(0.026).resolve(2708, 140).unwrap(), 70);
        assert_eq!(CondensedSize::TrainFraction(0.5).resolve(2708, 140).unwrap(), 70);
        assert_eq!(CondensedSize::Nodes(7).resolve(10, 3).unwrap(), 7);
        assert!(CondensedSize::Ratio(-1.0).resolve(10, 3).is_err());
    }

    #[test]
    fn every_preset_runs() {
        let ds = fixture();
        for preset in Preset::ALL {
            let cfg = PipelineConfig { size: CondensedSize::Nodes(9), ..preset.config() };
            let art = condense(&ds, &cfg).unwrap();
            assert_eq!(art.graph.num_nodes(), 9);
            assert_eq!(art.graph.labels, vec![0, 0, 0, 1, 1, 1, 2, 2, 2]);
            assert_eq!(matches!(art.graph.structure, Structure::Adjacency(_)), preset == Preset::Cgc);
            let stages: Vec<&str> = art.provenance.stage_ms.iter().map(|s| s.stage.as_str()).collect();
            assert_eq!(stages, ["prepare", "propagate", "assess", "augment", "partition", "aggregate", "structure"]);
        }
    }

    #[test]
    fn same_seed_same_graph() {
        let ds = fixture();
        let cfg = PipelineConfig { seed: 4, ..Default::default() };
        assert_eq!(condense(&ds, &cfg).unwrap().graph, condense(&ds, &cfg).unwrap().graph);
    }

    #[test]
    fn oversized_request_is_reported() {
        let ds = fixture();
        let cfg = PipelineConfig { size: CondensedSize::Nodes(500), p: 0.0, ..Default::default() };
        assert!(matches!(condense(&ds, &cfg), Err(CgcError::TooFewPoints { .. })));
    }
}
