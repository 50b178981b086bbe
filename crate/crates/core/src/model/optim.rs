use super::params::ParamSet;
use crate::error::{Error, Result};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Numerically stable binary cross-entropy on a logit.
pub fn bce_with_logits(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + libm::log1p(libm::exp(-logit.abs()))
}

pub(crate) fn check_labels(labels: &[f64]) -> Result<()> {
    match labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        Some(&y) => Err(Error::InvalidLabel(y)),
        None => Ok(()),
    }
}

/// Mean binary cross-entropy over the head dimensions.
pub fn loss(logits: &[f64], labels: &[f64]) -> Result<f64> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{} logits vs {} labels",
            logits.len(),
            labels.len()
        )));
    }
    check_labels(labels)?;
    let sum: f64 = logits.iter().zip(labels).map(|(&l, &y)| bce_with_logits(l, y)).sum();
    Ok(sum / logits.len() as f64)
}

/// Proximal pull toward an anchor: adds `mu * (w - anchor)` to the gradient.
#[derive(Debug, Clone, Copy)]
pub struct Prox<'a> {
    pub mu: f64,
    pub anchor: &'a ParamSet,
    /// Whether norm-flagged tensors are pulled too.
    pub include_norm: bool,
}

/// `w <- w - lr * (grad + mu (w - anchor))`, or plain SGD without `prox`.
pub fn sgd_step(params: &mut ParamSet, grads: &ParamSet, lr: f64, prox: Option<Prox<'_>>) -> Result<()> {
    if !(lr >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("learning rate {lr} is negative")));
    }
    params.check_congruent(grads)?;
    if let Some(p) = &prox {
        if !(p.mu >= 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("mu {} is negative", p.mu)));
        }
        params.check_congruent(p.anchor)?;
    }
    for (i, (w, g)) in params.tensors.iter_mut().zip(&grads.tensors).enumerate() {
        match &prox {
            Some(p) if p.mu > 0.0 && (p.include_norm || !w.is_norm) => {
                let anchor = &p.anchor.tensors[i].values;
                for ((wv, gv), av) in w.values.iter_mut().zip(&g.values).zip(anchor) {
                    *wv -= lr * (gv + p.mu * (*wv - av));
                }
            }
            _ => {
                for (wv, gv) in w.values.iter_mut().zip(&g.values) {
                    *wv -= lr * gv;
                }
            }
        }
    }
    Ok(())
}
