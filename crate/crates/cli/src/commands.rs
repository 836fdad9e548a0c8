use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use cgc::artifact::{read_artifact, write_artifact};
use cgc::eval::{evaluate, evaluate_whole, EvalConfig, EvalReport};
use cgc::io::{convert_edgelist, read_dataset, read_json, write_dataset, TextSources};
use cgc::pipeline::{condense, ConfigOverrides, PipelineConfig, Preset};
use cgc::theory::verify_all;
use cgc::Dataset;

use crate::args::{BenchArgs, CondenseArgs, ConvertArgs, EvalFlags, EvaluateArgs, PipelineFlags, ReportArgs, VerifyArgs};
use crate::error::{CliError, CliResult};
use crate::report::{append_row, summarize, write_summary, EvalRow};

pub const DATA_DIR_ENV: &str = "CGC_DATA_DIR";

/// Contents of a `--config` file. Every section is optional.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<String>,
    pub pipeline: ConfigOverrides,
    pub eval: EvalConfig,
}

fn load_config(path: Option<&Path>) -> CliResult<ConfigFile> {
    match path {
        Some(p) => read_json(p).map_err(|e| CliError::Usage(format!("config: {e}"))),
        None => Ok(ConfigFile::default()),
    }
}

/// A path if it is a directory, else `$CGC_DATA_DIR/<name>` (default `data/<name>`).
pub fn resolve_dataset(name: &str) -> PathBuf {
    let direct = PathBuf::from(name);
    if direct.is_dir() {
        return direct;
    }
    let root = std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("data"), PathBuf::from);
    root.join(name)
}

fn load_dataset(flag: Option<&str>, file: Option<&str>) -> CliResult<(String, Dataset)> {
    let name = flag
        .or(file)
        .ok_or_else(|| CliError::Usage("--dataset is required (flag or config file)".into()))?;
    let dir = resolve_dataset(name);
    if !dir.is_dir() {
        return Err(CliError::Data(format!("dataset not found: {}", dir.display())));
    }
    let label = dir.file_name().map_or_else(|| name.to_string(), |s| s.to_string_lossy().into_owned());
    Ok((label, read_dataset(&dir)?))
}

fn resolve_pipeline(flags: &PipelineFlags) -> CliResult<(ConfigFile, PipelineConfig)> {
    let mut file = load_config(flags.config.as_deref())?;
    let layered = std::mem::take(&mut file.pipeline).merge(flags.overrides())?;
    let cfg = layered.resolve()?;
    file.pipeline = layered;
    Ok((file, cfg))
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn convert(a: &ConvertArgs) -> CliResult<()> {
    let src = TextSources::from_paths(&a.edges, &a.features, &a.labels, &a.train, &a.val, &a.test)?;
    let ds = convert_edgelist(src, a.task)?;
    write_dataset(&ds, &a.out)?;
    #[derive(Serialize)]
    struct Out<'a> {
        out: &'a Path,
        num_nodes: usize,
        num_edges: usize,
        num_features: usize,
        num_classes: usize,
        train: usize,
        val: usize,
        test: usize,
    }
    let out = Out {
        out: &a.out,
        num_nodes: ds.num_nodes(),
        num_edges: ds.adjacency.num_edges(),
        num_features: ds.num_features(),
        num_classes: ds.num_classes(),
        train: ds.train.len(),
        val: ds.val.len(),
        test: ds.test.len(),
    };
    if a.json {
        return print_json(&out);
    }
    println!(
        "wrote {}: {} nodes, {} edges, {} features, {} classes, splits {}/{}/{}",
        a.out.display(),
        out.num_nodes,
        out.num_edges,
        out.num_features,
        out.num_classes,
        out.train,
        out.val,
        out.test
    );
    Ok(())
}

pub fn condense_cmd(a: &CondenseArgs) -> CliResult<()> {
    let (file, cfg) = resolve_pipeline(&a.pipeline)?;
    let (_, ds) = load_dataset(a.dataset.as_deref(), file.dataset.as_deref())?;
    let art = condense(&ds, &cfg)?;
    write_artifact(&art, &a.out)?;
    let g = &art.graph;
    let edges = g.adjacency().map_or(0, |adj| adj.num_edges());
    if a.json {
        #[derive(Serialize)]
        struct Out<'a> {
            out: &'a Path,
            num_nodes: usize,
            num_edges: usize,
            provenance: &'a cgc::artifact::Provenance,
        }
        return print_json(&Out { out: &a.out, num_nodes: g.num_nodes(), num_edges: edges, provenance: &art.provenance });
    }
    println!(
        "{} preset {}: {} nodes, {} edges, {:.1} ms",
        a.out.display(),
        cfg.preset,
        g.num_nodes(),
        edges,
        art.provenance.total_ms()
    );
    for s in &art.provenance.stage_ms {
        println!("  {:<10} {:>10.2} ms", s.stage, s.ms);
    }
    for w in &art.provenance.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn apply_eval_flags(mut cfg: EvalConfig, f: &EvalFlags) -> EvalConfig {
    macro_rules! take {
        ($($field:ident),+) => { $(if let Some(v) = f.$field { cfg.$field = v; })+ };
    }
    take!(model, hidden, lr, weight_decay, dropout, epochs, repeats, seed, ridge, depth);
    cfg
}

pub fn evaluate_cmd(a: &EvaluateArgs) -> CliResult<()> {
    let file = load_config(a.config.as_deref())?;
    let cfg = apply_eval_flags(file.eval, &a.eval);
    cfg.validate()?;
    let (name, ds) = load_dataset(a.dataset.as_deref(), file.dataset.as_deref())?;
    let (report, row) = if a.whole {
        let report = evaluate_whole(&ds, &cfg)?;
        let row = EvalRow::from_report(&name, "whole", 1.0, &report, 0.0, cfg.seed);
        (report, row)
    } else {
        let path = a.artifact.as_ref().expect("clap requires --artifact without --whole");
        let art = read_artifact(path)?;
        let report = evaluate(&art.graph, &ds, &cfg)?;
        let ratio = art.graph.num_nodes() as f64 / ds.num_nodes() as f64;
        let p = &art.provenance;
        let row = EvalRow::from_report(&name, p.preset.name(), ratio, &report, p.total_ms(), p.master_seed);
        (report, row)
    };
    if let Some(csv) = &a.csv {
        append_row(csv, &row)?;
    }
    if a.json {
        #[derive(Serialize)]
        struct Out<'a> {
            row: &'a EvalRow,
            report: &'a EvalReport,
        }
        return print_json(&Out { row: &row, report: &report });
    }
    println!(
        "{} {} {}: accuracy {:.4} ± {:.4} over {} runs",
        row.dataset,
        row.preset,
        row.model,
        report.mean,
        report.std,
        report.accuracies.len()
    );
    if !report.failed_repeats.is_empty() {
        eprintln!("warning: repeats {:?} diverged", report.failed_repeats);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub preset: Preset,
    pub num_nodes: usize,
    pub median_ms: f64,
    pub runs_ms: Vec<f64>,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

pub fn bench(a: &BenchArgs) -> CliResult<()> {
    if a.runs == 0 {
        return Err(CliError::Usage("--runs must be >= 1".into()));
    }
    let (file, _) = resolve_pipeline(&a.pipeline)?;
    let (name, ds) = load_dataset(a.dataset.as_deref(), file.dataset.as_deref())?;
    let presets = match file.pipeline.preset {
        Some(p) => vec![p],
        None => Preset::ALL.to_vec(),
    };
    let mut rows = Vec::new();
    for preset in presets {
        let cfg = ConfigOverrides { preset: Some(preset), ..file.pipeline.clone() }.resolve()?;
        let mut runs_ms = Vec::with_capacity(a.runs);
        let mut num_nodes = 0;
        for _ in 0..a.runs {
            let start = Instant::now();
            let art = condense(&ds, &cfg)?;
            runs_ms.push(start.elapsed().as_secs_f64() * 1e3);
            num_nodes = art.graph.num_nodes();
        }
        rows.push(BenchRow { preset, num_nodes, median_ms: median(&runs_ms), runs_ms });
    }
    if a.json {
        return print_json(&rows);
    }
    println!("dataset {name}, median of {} runs", a.runs);
    println!("| preset | nodes | median ms |");
    println!("|---|---:|---:|");
    for r in &rows {
        println!("| {} | {} | {:.1} |", r.preset, r.num_nodes, r.median_ms);
    }
    Ok(())
}

pub fn verify_props(a: &VerifyArgs) -> CliResult<()> {
    let report = verify_all(a.seed, a.draws)?;
    if a.json {
        print_json(&report)?;
    } else {
        println!("| check | passed | worst residual | tolerance | status |");
        println!("|---|---:|---:|---:|---|");
        for r in &report.rows {
            println!(
                "| {} | {}/{} | {:.3e} | {:.1e} | {} |",
                r.check,
                r.passed,
                r.draws,
                r.worst,
                r.tolerance,
                if r.ok() { "pass" } else { "FAIL" }
            );
        }
    }
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.rows.iter().filter(|r| !r.ok()).map(|r| r.check.as_str()).collect();
        Err(CliError::Failed(failed.join(", ")))
    }
}

pub fn report(a: &ReportArgs) -> CliResult<()> {
    let summary = summarize(&a.inputs)?;
    if let Some(p) = &a.out_csv {
        write_summary(p, &summary)?;
    }
    let md = crate::report::markdown(&summary);
    if let Some(p) = &a.out_md {
        fs::write(p, &md)?;
    }
    if a.json {
        return print_json(&summary);
    }
    print!("{md}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn config_file_rejects_unknown_sections() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"pipline": {}}"#).is_err());
        let f: ConfigFile = serde_json::from_str(r#"{"pipeline": {"preset": "simdm"}, "eval": {"epochs": 5}}"#).unwrap();
        assert_eq!(f.pipeline.preset, Some(Preset::Simdm));
        assert_eq!(f.eval.epochs, 5);
    }
}
