//! Checkpoints, run histories, result CSVs and summary tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use unifl_core::fl::RunHistory;
use unifl_core::metrics::{EvalReport, Summary};
use unifl_core::model::ParamSet;

use crate::error::{csv_err, io, json, Error, Result};

pub const RESULTS_FILE: &str = "results.csv";

/// Writes a parameter set as JSON; floats round-trip bit-exactly.
pub fn save_checkpoint(params: &ParamSet, path: &Path) -> Result<()> {
    let text = serde_json::to_string(params).map_err(json(path))?;
    std::fs::write(path, text + "\n").map_err(io(path))
}

pub fn load_checkpoint(path: &Path) -> Result<ParamSet> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(json(path))
}

pub fn save_history(history: &[RunHistory], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(history).map_err(json(path))?;
    std::fs::write(path, text + "\n").map_err(io(path))
}

pub fn load_history(path: &Path) -> Result<Vec<RunHistory>> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(json(path))
}

/// `task,client,method,seed,auprc,n_samples,rounds_used`.
pub fn write_reports(reports: &[EvalReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in reports {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn read_reports(path: &Path) -> Result<Vec<EvalReport>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

/// Every results file under `dir`, in path order.
pub fn find_results(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(io(&d))? {
            let p = entry.map_err(io(&d))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == RESULTS_FILE) {
                out.push(p);
            }
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::Usage(format!("no {RESULTS_FILE} under {}", dir.display())));
    }
    Ok(out)
}

/// One line per `(row, method)`: mean and percent change against Local.
pub fn summary_csv(summary: &Summary) -> String {
    let mut out = String::from("row,method,mean_auprc,relative_pct\n");
    for row in &summary.rows {
        for m in &summary.methods {
            if let Some(c) = row.cells.get(m) {
                let rel = c.relative_pct.map(|p| format!("{p:.2}")).unwrap_or_default();
                writeln!(out, "{},{m},{:.4},{rel}", row.label, c.mean).unwrap();
            }
        }
    }
    out
}

/// Table with three-decimal means and signed percentages.
pub fn summary_table(summary: &Summary) -> String {
    let label_w = summary.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(7);
    let col_w = 17;
    let mut out = format!("{:label_w$}", "");
    for m in &summary.methods {
        write!(out, " {m:>col_w$}").unwrap();
    }
    out.push('\n');
    for row in &summary.rows {
        write!(out, "{:label_w$}", row.label).unwrap();
        for m in &summary.methods {
            let cell = match row.cells.get(m) {
                Some(c) => match c.relative_pct {
                    Some(p) => format!("{:.3} ({p:+.1}%)", c.mean),
                    None => format!("{:.3}", c.mean),
                },
                None => "-".into(),
            };
            write!(out, " {cell:>col_w$}").unwrap();
        }
        out.push('\n');
    }
    if let Some(r) = summary.fl_cl_round_ratio {
        writeln!(out, "\nFL/CL rounds used: {r:.2}").unwrap();
    }
    out
}
