use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::cv::{CvReport, CvRun};
use super::train::TrainReport;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "epoch,loss_total,loss_gc,loss_lfr,train_acc,lr,seconds";

/// Per-epoch curve as CSV; `loss_lfr` is left empty when not computed.
pub fn curve_csv(report: &TrainReport) -> String {
    let mut s = String::with_capacity(64 * (report.epochs.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for e in &report.epochs {
        let lfr = e.loss_lfr.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            e.epoch, e.loss_total, e.loss_gc, lfr, e.train_acc, e.lr, e.seconds
        );
    }
    s
}

/// Aligned table of mean ± std accuracies, one row per run.
pub fn results_table(reports: &[&CvReport]) -> String {
    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(0).max("Method".len());
    let dataset = reports.first().map_or("", |r| r.dataset.as_str());
    let col = dataset.len().max(11);
    let mut s = format!("{:<width$}  {:>col$}\n", "Method", dataset);
    for r in reports {
        let cell = format!("{:.1}±{:.1}", 100.0 * r.mean, 100.0 * r.std);
        let _ = writeln!(s, "{:<width$}  {:>col$}", r.name, cell);
    }
    s
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c.to_ascii_lowercase() } else { '_' })
        .collect();
    s.trim_matches('_').to_string()
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes a single training run: `{stem}.csv` and `{stem}.json`.
pub fn emit_train(report: &TrainReport, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(vec![
        write(dir.join(format!("{stem}.csv")), &curve_csv(report))?,
        write(dir.join(format!("{stem}.json")), &json)?,
    ])
}

/// Writes one curve CSV per fold of every run, `summary.json` holding the
/// list of reports, and `results.txt` with the accuracy table.
pub fn emit_reports(runs: &[CvRun], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for run in runs {
        let stem = slug(&run.report.name);
        for f in &run.folds {
            written.push(write(dir.join(format!("{stem}_fold{}.csv", f.fold)), &curve_csv(f))?);
        }
    }
    let reports: Vec<&CvReport> = runs.iter().map(|r| &r.report).collect();
    written.push(write(dir.join("summary.json"), &summary_json(&reports)?)?);
    written.push(write(dir.join("results.txt"), &results_table(&reports))?);
    Ok(written)
}

pub fn summary_json(reports: &[&CvReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::invalid(e.to_string()))
}

/// Mean and std per grid value, for plotting accuracy against the grid.
pub fn sweep_csv(param: &str, points: &[(f64, &CvReport)]) -> String {
    let mut s = format!("{param},mean,std\n");
    for (v, r) in points {
        let _ = writeln!(s, "{v},{},{}", r.mean, r.std);
    }
    s
}

pub fn read_summary(path: &Path) -> Result<Vec<CvReport>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(list) = serde_json::from_str::<Vec<CvReport>>(&text) {
        return Ok(list);
    }
    serde_json::from_str::<CvReport>(&text)
        .map(|r| vec![r])
        .map_err(|e| Error::invalid(format!("{}: not a cross-validation summary: {e}", path.display())))
}
