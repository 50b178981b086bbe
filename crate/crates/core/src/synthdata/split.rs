use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::PatientRecord;
use crate::error::{Error, Result};
use crate::model::Task;
use crate::rng;

pub const DEFAULT_RATIOS: [u32; 3] = [8, 1, 1];

/// Sorted, disjoint and exhaustive index sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn parts(&self) -> [&[usize]; 3] {
        [&self.train, &self.valid, &self.test]
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Integer counts per `(stratum, part)`. Every count is the floor or ceiling
/// of its ideal share, every stratum keeps its exact size, and part totals
/// stay within one sample of their ideal share of the whole.
fn apportion(strata: &[usize], ratios: [u32; 3]) -> Vec<[usize; 3]> {
    let denom: u64 = ratios.iter().map(|&r| r as u64).sum();
    let total: u64 = strata.iter().map(|&n| n as u64).sum();
    // Ideal shares scaled by `denom` so all arithmetic stays exact.
    let ideal = |n: u64, p: usize| n * ratios[p] as u64;
    let floors: Vec<[u64; 3]> = strata
        .iter()
        .map(|&n| core::array::from_fn(|p| ideal(n as u64, p) / denom))
        .collect();
    let free: Vec<(usize, usize)> = strata
        .iter()
        .enumerate()
        .flat_map(|(s, &n)| (0..3).filter(move |&p| ideal(n as u64, p) % denom != 0).map(move |p| (s, p)))
        .collect();

    let mut best: Option<(u64, Vec<[u64; 3]>)> = None;
    for mask in 0u64..(1u64 << free.len()) {
        let mut counts = floors.clone();
        for (bit, &(s, p)) in free.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                counts[s][p] += 1;
            }
        }
        if counts.iter().zip(strata).any(|(c, &n)| c.iter().sum::<u64>() != n as u64) {
            continue;
        }
        let worst = (0..3)
            .map(|p| {
                let got = counts.iter().map(|c| c[p]).sum::<u64>() * denom;
                got.abs_diff(ideal(total, p))
            })
            .max()
            .unwrap_or(0);
        if best.as_ref().is_none_or(|(w, _)| worst < *w) {
            best = Some((worst, counts));
        }
    }
    best.map(|(_, c)| c)
        .unwrap_or(floors)
        .into_iter()
        .map(|c| c.map(|v| v as usize))
        .collect()
}

/// Stratified split of `0..labels.len()` on a binary key.
pub fn stratified_split(strata_keys: &[bool], ratios: [u32; 3], rng: &mut rng::Rng) -> SplitSpec {
    let mut groups: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &k) in strata_keys.iter().enumerate() {
        groups[k as usize].push(i);
    }
    if !strata_keys.is_empty() && groups.iter().any(Vec::is_empty) {
        log::warn!("one class is empty; split is unstratified");
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let counts = apportion(&sizes, ratios);
    let mut out = SplitSpec::default();
    for (group, [n_train, n_valid, _]) in groups.iter_mut().zip(counts) {
        group.shuffle(rng);
        out.train.extend_from_slice(&group[..n_train]);
        out.valid.extend_from_slice(&group[n_train..n_train + n_valid]);
        out.test.extend_from_slice(&group[n_train + n_valid..]);
    }
    out.train.sort_unstable();
    out.valid.sort_unstable();
    out.test.sort_unstable();
    out
}

/// Per-task stratified split of one client's records, keyed on the client
/// id and task so it does not depend on other clients.
pub fn split(records: &[PatientRecord], task: Task, ratios: [u32; 3], seed: u64) -> Result<SplitSpec> {
    if ratios.iter().all(|&r| r == 0) {
        return Err(Error::InvalidArgument("split ratios are all zero".into()));
    }
    let keys = records
        .iter()
        .map(|r| {
            r.labels.stratum(task).ok_or_else(|| {
                Error::InvalidArgument(alloc::format!("{} has no {} label", r.patient_id, task.name()))
            })
        })
        .collect::<Result<Vec<bool>>>()?;
    let client = records.first().map_or(0, |r| r.client_id);
    let mut rng = rng::stream(seed, rng::domain::SPLIT, client as u64, task.index() as u64);
    Ok(stratified_split(&keys, ratios, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(n: usize, pos: usize) -> Vec<bool> {
        (0..n).map(|i| i < pos).collect()
    }

    fn check_bounds(keys: &[bool], s: &SplitSpec) {
        let n = keys.len() as f64;
        let pos = keys.iter().filter(|&&k| k).count() as f64;
        for (part, share) in s.parts().into_iter().zip([0.8, 0.1, 0.1]) {
            assert!((part.len() as f64 - n * share).abs() <= 1.0, "{} vs {}", part.len(), n * share);
            let p = part.iter().filter(|&&i| keys[i]).count() as f64;
            assert!((p - pos * share).abs() <= 1.0);
            let neg = part.len() as f64 - p;
            assert!((neg - (n - pos) * share).abs() <= 1.0);
        }
        let mut all: Vec<usize> = s.parts().concat();
        all.sort_unstable();
        assert_eq!(all, (0..keys.len()).collect::<Vec<_>>());
    }

    #[test]
    fn hundred_with_twenty_positive() {
        let k = keys(100, 20);
        let s = stratified_split(&k, DEFAULT_RATIOS, &mut rng::stream(0, 0, 0, 0));
        let test_pos = s.test.iter().filter(|&&i| k[i]).count();
        assert!((1..=3).contains(&test_pos));
        check_bounds(&k, &s);
    }

    #[test]
    fn bounds_hold_for_many_sizes() {
        for n in 1..120 {
            for pos in [0, 1, n / 7, n / 3, n / 2, n] {
                let k = keys(n, pos.min(n));
                let s = stratified_split(&k, DEFAULT_RATIOS, &mut rng::stream(n as u64, 0, 0, 0));
                check_bounds(&k, &s);
            }
        }
    }

    #[test]
    fn split_is_deterministic() {
        let k = keys(57, 13);
        let a = stratified_split(&k, DEFAULT_RATIOS, &mut rng::stream(4, 0, 0, 0));
        let b = stratified_split(&k, DEFAULT_RATIOS, &mut rng::stream(4, 0, 0, 0));
        assert_eq!(a, b);
    }
}
