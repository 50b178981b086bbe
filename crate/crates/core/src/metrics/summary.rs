use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::error::{Error, Result};
use crate::model::Task;

/// Column order of summary tables.
pub const METHOD_ORDER: [&str; 6] = ["Local", "FedAvg", "FedProx", "FedBN", "FedPxN", "Centralized"];
const BASELINE: &str = "Local";
const FEDERATED: [&str; 4] = ["FedAvg", "FedProx", "FedBN", "FedPxN"];
const CENTRALIZED: &str = "Centralized";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: f64,
    /// Relative change against Local in percent; `None` for Local itself.
    pub relative_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    /// `method -> cell`, only for methods present.
    pub cells: BTreeMap<String, Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub methods: Vec<String>,
    /// Task rows, then client rows, then the grand average.
    pub rows: Vec<SummaryRow>,
    /// Mean federated rounds over mean centralized epochs.
    pub fl_cl_round_ratio: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn row<'a>(label: String, methods: &[String], reports: impl Iterator<Item = &'a EvalReport> + Clone) -> SummaryRow {
    let mean_of = |m: &str| {
        let xs: Vec<f64> = reports.clone().filter(|r| r.method == m).map(|r| r.auprc).collect();
        (!xs.is_empty()).then(|| mean(&xs))
    };
    let base = mean_of(BASELINE);
    let mut cells = BTreeMap::new();
    for m in methods {
        if let Some(v) = mean_of(m) {
            let relative_pct = match base {
                Some(b) if m != BASELINE && b != 0.0 => Some((v - b) / b * 100.0),
                _ => None,
            };
            cells.insert(m.clone(), Cell { mean: v, relative_pct });
        }
    }
    SummaryRow { label, cells }
}

/// Means over seeds per task, per client and overall, relative to Local.
/// Percentages use unrounded means.
pub fn summarize(reports: &[EvalReport]) -> Result<Summary> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to summarize".into()));
    }
    let baseline: BTreeSet<(Task, u32)> = reports
        .iter()
        .filter(|r| r.method == BASELINE)
        .map(|r| (r.task, r.client))
        .collect();
    for r in reports {
        if !baseline.contains(&(r.task, r.client)) {
            return Err(Error::MissingBaseline(alloc::format!("task {} client {}", r.task.name(), r.client)));
        }
    }
    let present: BTreeSet<&str> = reports.iter().map(|r| r.method.as_str()).collect();
    let mut methods: Vec<String> = METHOD_ORDER
        .iter()
        .filter(|m| present.contains(*m))
        .map(|m| m.to_string())
        .collect();
    methods.extend(
        present
            .iter()
            .filter(|m| !METHOD_ORDER.contains(m))
            .map(|m| m.to_string()),
    );

    let tasks: BTreeSet<Task> = reports.iter().map(|r| r.task).collect();
    let clients: BTreeSet<u32> = reports.iter().map(|r| r.client).collect();
    let mut rows = Vec::new();
    for &t in &tasks {
        rows.push(row(t.display_name().to_string(), &methods, reports.iter().filter(move |r| r.task == t)));
    }
    for &c in &clients {
        rows.push(row(alloc::format!("client {c}"), &methods, reports.iter().filter(move |r| r.client == c)));
    }
    rows.push(row("Average".to_string(), &methods, reports.iter()));

    let run_rounds = |pred: &dyn Fn(&str) -> bool| {
        let runs: BTreeMap<(Task, &str, u64), usize> = reports
            .iter()
            .filter(|r| pred(&r.method))
            .map(|r| ((r.task, r.method.as_str(), r.seed), r.rounds_used))
            .collect();
        let xs: Vec<f64> = runs.values().map(|&v| v as f64).collect();
        (!xs.is_empty()).then(|| mean(&xs))
    };
    let fl = run_rounds(&|m| FEDERATED.contains(&m));
    let cl = run_rounds(&|m| m == CENTRALIZED);
    let fl_cl_round_ratio = match (fl, cl) {
        (Some(f), Some(c)) if c > 0.0 => Some(f / c),
        _ => None,
    };
    Ok(Summary { methods, rows, fl_cl_round_ratio })
}
