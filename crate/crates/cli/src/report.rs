//! CSV rows written by `evaluate` and the `report` summary over them.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cgc::eval::EvalReport;

use crate::error::CliResult;

/// One evaluation; column order is the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub dataset: String,
    pub preset: String,
    pub ratio: f64,
    pub model: String,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub condense_ms: f64,
    pub seed: u64,
}

impl EvalRow {
    pub fn from_report(dataset: &str, preset: &str, ratio: f64, r: &EvalReport, condense_ms: f64, seed: u64) -> Self {
        Self {
            dataset: dataset.to_string(),
            preset: preset.to_string(),
            ratio,
            model: r.model.to_string(),
            acc_mean: r.mean,
            acc_std: r.std,
            condense_ms,
            seed,
        }
    }
}

/// Appends `row`, writing the header first when the file is new or empty.
pub fn append_row(path: &Path, row: &EvalRow) -> CliResult<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub preset: String,
    pub ratio: f64,
    pub model: String,
    pub rows: usize,
    /// Mean of the per-row accuracy means.
    pub acc_mean: f64,
    /// Mean of the per-row standard deviations.
    pub acc_std: f64,
    pub condense_ms: f64,
}

/// Groups rows by dataset, preset, ratio and model, in sorted order.
pub fn summarize(inputs: &[PathBuf]) -> CliResult<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(String, String, String, String), Vec<EvalRow>> = BTreeMap::new();
    for p in inputs {
        let mut r = csv::Reader::from_path(p)?;
        for row in r.deserialize::<EvalRow>() {
            let row = row?;
            let key = (row.dataset.clone(), row.preset.clone(), format!("{:.6}", row.ratio), row.model.clone());
            groups.entry(key).or_default().push(row);
        }
    }
    Ok(groups
        .into_values()
        .map(|rows| {
            let n = rows.len() as f64;
            let mean = |f: fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
            SummaryRow {
                dataset: rows[0].dataset.clone(),
                preset: rows[0].preset.clone(),
                ratio: rows[0].ratio,
                model: rows[0].model.clone(),
                rows: rows.len(),
                acc_mean: mean(|r| r.acc_mean),
                acc_std: mean(|r| r.acc_std),
                condense_ms: mean(|r| r.condense_ms),
            }
        })
        .collect())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn markdown(rows: &[SummaryRow]) -> String {
    let mut s = String::from("| dataset | preset | ratio | model | rows | accuracy | condense ms |\n");
    s.push_str("|---|---|---:|---|---:|---:|---:|\n");
    for r in rows {
        s.push_str(&format!(
            "| {} | {} | {:.4} | {} | {} | {:.2} ± {:.2} | {:.1} |\n",
            r.dataset,
            r.preset,
            r.ratio,
            r.model,
            r.rows,
            100.0 * r.acc_mean,
            100.0 * r.acc_std,
            r.condense_ms
        ));
    }
    s
}
