//! AUPRC evaluation and run summaries.

mod summary;

pub use summary::{summarize, Summary, SummaryRow, METHOD_ORDER};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward_patient, Hyperparams, ParamSet, Sample, Task};

/// Non-interpolated average precision.
///
/// Items are visited in descending score order; all items sharing a score
/// form one group, and each group adds `positives_in_group / total_positives`
/// times the precision over everything ranked at or above it. The result is
/// independent of input order.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::InvalidLabel(bad as f64));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let total = positives as f64;
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let value = scores[order[i]];
        let mut group_pos = 0;
        while i < order.len() && scores[order[i]] == value {
            group_pos += labels[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        tp += group_pos;
        if group_pos > 0 {
            ap += (group_pos as f64 / total) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

/// How multi-label Dx scores are reduced to one AUPRC.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Pool every `(sample, label)` pair.
    #[default]
    Micro,
    /// Mean of per-label AUPRC over labels that have a positive.
    Macro,
}

/// AUPRC of score/label matrices (`rows x width`, row-major).
pub fn multilabel_auprc(scores: &[f64], labels: &[u8], width: usize, averaging: Averaging) -> Result<f64> {
    if width <= 1 || averaging == Averaging::Micro {
        return auprc(scores, labels);
    }
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let mut sum = 0.0;
    let mut counted = 0;
    for k in 0..width {
        let s: Vec<f64> = scores.iter().skip(k).step_by(width).copied().collect();
        let y: Vec<u8> = labels.iter().skip(k).step_by(width).copied().collect();
        match auprc(&s, &y) {
            Ok(v) => {
                sum += v;
                counted += 1;
            }
            Err(Error::NoPositives) => {}
            Err(e) => return Err(e),
        }
    }
    if counted == 0 {
        return Err(Error::NoPositives);
    }
    Ok(sum / counted as f64)
}

/// Logits for every sample, flattened row-major.
pub fn predict(params: &ParamSet, samples: &[Sample], hp: &Hyperparams) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples.len() * hp.head_dim());
    for s in samples {
        out.extend(forward_patient(&s.events, params, hp)?.logits);
    }
    Ok(out)
}

/// AUPRC of a model on a sample set. Logits are ranked directly.
pub fn evaluate(params: &ParamSet, samples: &[Sample], hp: &Hyperparams, averaging: Averaging) -> Result<f64> {
    let scores = predict(params, samples, hp)?;
    let labels: Vec<u8> = samples
        .iter()
        .flat_map(|s| s.labels.iter().map(|&y| y as u8))
        .collect();
    multilabel_auprc(&scores, &labels, hp.head_dim(), averaging)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub client: u32,
    pub method: String,
    pub seed: u64,
    pub auprc: f64,
    pub n_samples: usize,
    pub rounds_used: usize,
}
