//! Summary statistics over a directory of per-seed CSVs.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::experiment::read_run_csvs;
use crate::diagnostics::RunRecord;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvSummary {
    pub file: String,
    pub rows: usize,
    pub last_step: Option<u64>,
    pub final_return: Option<f64>,
    pub final_success: Option<f64>,
    /// Mean success over all evaluation rows.
    pub success_auc: Option<f64>,
    pub mean_gap: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, total) = values.fold((0usize, 0.0), |(n, t), v| (n + 1, t + v));
    (n > 0).then(|| total / n as f64)
}

pub fn summarize_rows(file: &str, rows: &[RunRecord]) -> CsvSummary {
    let last = rows.last();
    CsvSummary {
        file: file.to_string(),
        rows: rows.len(),
        last_step: last.map(|r| r.step),
        final_return: last.and_then(|r| r.episode_return),
        final_success: last.and_then(|r| r.success),
        success_auc: mean(rows.iter().filter_map(|r| r.success)),
        mean_gap: mean(rows.iter().filter_map(|r| r.gap)),
    }
}

pub fn summarize_dir(dir: &Path) -> Result<Vec<CsvSummary>> {
    Ok(read_run_csvs(dir)?.iter().map(|(name, rows)| summarize_rows(name, rows)).collect())
}

fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    let m = mean(values.iter().copied())?;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64;
    Some((m, var.sqrt()))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

/// Human-readable table plus across-file mean ± std lines.
pub fn format_report(summaries: &[CsvSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:>6} {:>8} {:>12} {:>10} {:>10} {:>10}", "file", "rows", "step", "return", "success", "auc", "gap");
    for s in summaries {
        let _ = writeln!(
            out,
            "{:<24} {:>6} {:>8} {:>12} {:>10} {:>10} {:>10}",
            s.file,
            s.rows,
            s.last_step.map_or_else(|| "-".into(), |v| v.to_string()),
            cell(s.final_return),
            cell(s.final_success),
            cell(s.success_auc),
            cell(s.mean_gap)
        );
    }
    let collect = |f: fn(&CsvSummary) -> Option<f64>| summaries.iter().filter_map(f).collect::<Vec<_>>();
    for (label, values) in [
        ("final return", collect(|s| s.final_return)),
        ("final success", collect(|s| s.final_success)),
        ("success auc", collect(|s| s.success_auc)),
    ] {
        if let Some((m, sd)) = mean_std(&values) {
            let _ = writeln!(out, "{label}: {m:.4} ± {sd:.4} over {} runs", values.len());
        }
    }
    if summaries.is_empty() {
        out.push_str("no run CSVs found\n");
    }
    out
}
