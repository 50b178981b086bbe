use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::{backward_batch, sgd_step, Hyperparams, ParamSet, Prox, Sample};
use crate::rng::{domain, stream};

/// Which shuffle streams a stretch of local training draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub seed: u64,
    /// Client id keying the stream.
    pub stream: u32,
    /// Global index of the first epoch, so round `t` with `L` local epochs
    /// starts at `t * L`.
    pub first_epoch: usize,
    pub epochs: usize,
    /// Reuse the epoch-0 order for every epoch.
    pub literal_shuffle: bool,
}

/// Sample visiting order for one epoch.
pub fn epoch_order(n: usize, seed: u64, stream_id: u32, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, domain::SHUFFLE, u64::from(stream_id), epoch as u64);
    order.shuffle(&mut rng);
    order
}

/// Consecutive minibatches; the last may be short.
pub fn batches(order: &[usize], batch_size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(batch_size.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub params: ParamSet,
    /// Mean minibatch loss, each measured before its step.
    pub mean_loss: f64,
    pub steps: usize,
}

/// Minibatch SGD over `data` for `schedule.epochs` epochs, optionally with a
/// proximal pull toward an anchor.
pub fn local_train(
    start: &ParamSet,
    data: &[Sample],
    hp: &Hyperparams,
    schedule: &Schedule,
    prox: Option<Prox<'_>>,
) -> Result<LocalResult> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    let mut params = start.clone();
    let mut loss_sum = 0.0;
    let mut steps = 0;
    let fixed = schedule
        .literal_shuffle
        .then(|| epoch_order(data.len(), schedule.seed, schedule.stream, 0));
    let mut batch: Vec<&Sample> = Vec::with_capacity(hp.batch_size);
    for e in 0..schedule.epochs {
        let order = match &fixed {
            Some(o) => o.clone(),
            None => epoch_order(data.len(), schedule.seed, schedule.stream, schedule.first_epoch + e),
        };
        for idx in batches(&order, hp.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| &data[i]));
            let (loss, grads) = backward_batch(&batch, &params, hp)?;
            sgd_step(&mut params, &grads, hp.learning_rate, prox)?;
            loss_sum += loss;
            steps += 1;
        }
    }
    if !params.all_finite() {
        return Err(Error::InvalidArgument("parameters diverged to non-finite values".into()));
    }
    Ok(LocalResult { params, mean_loss: loss_sum / steps.max(1) as f64, steps })
}
