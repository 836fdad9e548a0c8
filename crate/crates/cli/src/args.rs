use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cgc::eval::EvalModel;
use cgc::partition::{ClusterMethod, Weighting};
use cgc::pipeline::{ConfigOverrides, Preset, StructureKind};
use cgc::propagation::{PropagationRule, DEFAULT_PPR_BETA};
use cgc::Task;

#[derive(Debug, Parser)]
#[command(name = "cgc", version, about = "Training-free graph condensation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert text edge list, features, labels and splits into a dataset directory.
    Convert(ConvertArgs),
    /// Condense a dataset into a small labeled graph.
    Condense(CondenseArgs),
    /// Train on a condensed graph and test on the original one.
    Evaluate(EvaluateArgs),
    /// Median condensation wall clock per preset.
    Bench(BenchArgs),
    /// Numerical checks of the matching identities and bounds.
    VerifyProps(VerifyArgs),
    /// Summarize evaluation CSV files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "transductive")]
    pub task: Task,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleName {
    Sgc,
    Ppr,
    Mean,
}

/// Pipeline settings accepted on the command line. Unset flags fall back to
/// the config file, then to the preset.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineFlags {
    /// JSON config file with `dataset`, `pipeline` and `eval` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Condensed size as a fraction of the graph's node count.
    #[arg(long, conflicts_with_all = ["nodes", "train_fraction"])]
    pub ratio: Option<f64>,
    #[arg(long, conflicts_with = "train_fraction")]
    pub nodes: Option<usize>,
    /// Condensed size as a fraction of the training set.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleName>,
    /// Restart probability for `--rule ppr`.
    #[arg(long, requires = "rule")]
    pub beta: Option<f64>,
    /// Augmentation percentage of the training set.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub weighting: Option<Weighting>,
    #[arg(long)]
    pub method: Option<ClusterMethod>,
    #[arg(long, value_enum)]
    pub structure: Option<StructureFlag>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StructureFlag {
    Graphless,
    Adjacency,
}

impl PipelineFlags {
    pub fn overrides(&self) -> ConfigOverrides {
        let rule = self.rule.map(|r| match r {
            RuleName::Sgc => PropagationRule::Sgc,
            RuleName::Ppr => PropagationRule::Ppr { beta: self.beta.unwrap_or(DEFAULT_PPR_BETA) },
            RuleName::Mean => PropagationRule::Mean,
        });
        ConfigOverrides {
            preset: self.preset,
            ratio: self.ratio,
            nodes: self.nodes,
            train_fraction: self.train_fraction,
            depth: self.depth,
            rule,
            p: self.p,
            tau: self.tau,
            weighting: self.weighting,
            method: self.method,
            structure: self.structure.map(|s| match s {
                StructureFlag::Graphless => StructureKind::Graphless,
                StructureFlag::Adjacency => StructureKind::Adjacency,
            }),
            threshold: self.threshold,
            alpha: self.alpha,
            jitter: self.jitter,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct CondenseArgs {
    /// Dataset directory, or a name looked up under `$CGC_DATA_DIR` (default `data/`).
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalFlags {
    #[arg(long)]
    pub model: Option<EvalModel>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long = "eval-seed")]
    pub seed: Option<u64>,
    /// Ridge strength for `sgc_ridge`.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Propagation depth for `sgc_ridge`.
    #[arg(long = "eval-depth")]
    pub depth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Original dataset, as for `condense`.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Condensed artifact directory; omit with `--whole`.
    #[arg(long, required_unless_present = "whole")]
    pub artifact: Option<PathBuf>,
    /// Train on the original graph's training nodes instead.
    #[arg(long)]
    pub whole: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub eval: EvalFlags,
    /// Append a summary row to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub dataset: Option<String>,
    /// Runs per preset. `--preset` limits timing to one preset.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation CSV files; repeatable.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_md: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_become_overrides() {
        let cli = Cli::try_parse_from([
            "cgc", "condense", "--dataset", "d", "--out", "o", "--preset", "simdm", "--rule", "ppr", "--beta", "0.2",
            "--ratio", "0.1",
        ])
        .unwrap();
        let Command::Condense(c) = cli.command else { panic!() };
        let o = c.pipeline.overrides();
        assert_eq!(o.preset, Some(Preset::Simdm));
        assert_eq!(o.rule, Some(PropagationRule::Ppr { beta: 0.2 }));
        assert_eq!(o.ratio, Some(0.1));
    }

    #[test]
    fn rejects_invalid_preset_and_size_conflicts() {
        assert!(Cli::try_parse_from(["cgc", "condense", "--out", "o", "--preset", "fast"]).is_err());
        assert!(Cli::try_parse_from(["cgc", "condense", "--out", "o", "--ratio", "0.1", "--nodes", "3"]).is_err());
    }
}
