use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParamSet;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// `n_i / sum(n)`.
    #[default]
    Size,
    Uniform,
}

/// A client's post-training parameters and train-set size.
#[derive(Debug, Clone, Copy)]
pub struct ClientUpdate<'a> {
    pub params: &'a ParamSet,
    pub n_samples: usize,
}

fn weights(updates: &[ClientUpdate<'_>], weighting: Weighting) -> Result<Vec<f64>> {
    if updates.is_empty() {
        return Err(Error::InvalidArgument("no client updates to aggregate".into()));
    }
    let first = updates[0].params;
    for u in &updates[1..] {
        first.check_congruent(u.params)?;
    }
    let raw: Vec<f64> = match weighting {
        Weighting::Size => updates.iter().map(|u| u.n_samples as f64).collect(),
        Weighting::Uniform => alloc::vec![1.0; updates.len()],
    };
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("client weights sum to zero".into()));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Weighted mean of one coordinate, written as the first client's value plus
/// weighted offsets so that equal inputs reproduce themselves exactly, then
/// clamped to the inputs' range to absorb round-off.
fn mean_coord(values: impl Iterator<Item = f64> + Clone, weights: &[f64]) -> f64 {
    let mut it = values.clone();
    let first = it.next().expect("nonempty");
    let (mut lo, mut hi) = (first, first);
    let mut acc = first;
    for (v, w) in it.zip(&weights[1..]) {
        acc += w * (v - first);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    acc.clamp(lo, hi)
}

fn average_into(out: &mut ParamSet, updates: &[ClientUpdate<'_>], weights: &[f64], include: impl Fn(bool) -> bool) {
    for (ti, tensor) in out.tensors.iter_mut().enumerate() {
        if !include(tensor.is_norm) {
            continue;
        }
        for (vi, v) in tensor.values.iter_mut().enumerate() {
            *v = mean_coord(updates.iter().map(|u| u.params.tensors[ti].values[vi]), weights);
        }
    }
}

/// FedAvg: every tensor, norm-flagged ones included, becomes the weighted
/// mean of the client tensors.
pub fn aggregate_fedavg(updates: &[ClientUpdate<'_>], weighting: Weighting) -> Result<ParamSet> {
    let w = weights(updates, weighting)?;
    let mut out = updates[0].params.clone();
    average_into(&mut out, updates, &w, |_| true);
    Ok(out)
}

/// FedBN: shared tensors are averaged as in FedAvg; each client keeps its
/// own norm-flagged tensors. Returns one parameter set per client.
pub fn aggregate_fedbn(updates: &[ClientUpdate<'_>], weighting: Weighting) -> Result<Vec<ParamSet>> {
    let w = weights(updates, weighting)?;
    let mut shared = updates[0].params.clone();
    average_into(&mut shared, updates, &w, |is_norm| !is_norm);
    Ok(updates
        .iter()
        .map(|u| {
            let mut own = shared.clone();
            for (dst, src) in own.tensors.iter_mut().zip(&u.params.tensors) {
                if dst.is_norm {
                    dst.values.clone_from(&src.values);
                }
            }
            own
        })
        .collect())
}
