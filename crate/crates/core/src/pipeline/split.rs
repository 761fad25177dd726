//! Stratified evaluation/test split and cross-validation folds.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::substream;
use crate::{Error, Result};

/// Indices into the input, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub evaluation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits items stratified by label. The evaluation set gets
/// `round(n · eval_fraction)` items, shared among labels by largest
/// remainder (ties to the earlier label), so every label's share is within
/// one item of its global proportion.
pub fn split_dataset<L: Ord + Clone + std::fmt::Debug>(
    labels: &[L],
    eval_fraction: f64,
    test_fraction: f64,
    seed: u64,
) -> Result<Split> {
    if !(0.0..=1.0).contains(&eval_fraction) || (eval_fraction + test_fraction - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions {eval_fraction} + {test_fraction} must sum to 1")));
    }
    let mut by_label: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(l.clone()).or_default().push(i);
    }
    for (l, members) in &by_label {
        if members.len() < 2 && eval_fraction > 0.0 && eval_fraction < 1.0 {
            log::warn!("label {l:?} has a single item and cannot be stratified");
        }
    }
    let total = (labels.len() as f64 * eval_fraction).round() as usize;
    let exact: Vec<f64> = by_label.values().map(|m| m.len() as f64 * eval_fraction).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut remaining = total.saturating_sub(quota.iter().sum());
    for &c in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if quota[c] < by_label.values().nth(c).map_or(0, Vec::len) {
            quota[c] += 1;
            remaining -= 1;
        }
    }
    let mut split = Split { evaluation: Vec::new(), test: Vec::new() };
    for (c, members) in by_label.values().enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut substream(seed, c as u64));
        split.evaluation.extend_from_slice(&shuffled[..quota[c]]);
        split.test.extend_from_slice(&shuffled[quota[c]..]);
    }
    split.evaluation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Assigns items to `k` folds, dealing each label's shuffled members round-robin.
pub fn stratified_folds<L: Ord + Clone>(labels: &[L], k: usize, seed: u64) -> Vec<usize> {
    let mut by_label: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(l.clone()).or_default().push(i);
    }
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for (c, members) in by_label.values().enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut substream(seed, 1000 + c as u64));
        for i in shuffled {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_stratification() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 7 % 3) as u8).collect();
        let s = split_dataset(&labels, 0.1, 0.9, 4).unwrap();
        assert_eq!((s.evaluation.len(), s.test.len()), (10, 90));
        for l in 0..3u8 {
            let n = labels.iter().filter(|&&x| x == l).count() as f64;
            let e = s.evaluation.iter().filter(|&&i| labels[i] == l).count() as f64;
            assert!((e - n * 0.1).abs() <= 1.0);
        }
        let mut all: Vec<usize> = s.evaluation.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(s, split_dataset(&labels, 0.1, 0.9, 4).unwrap());
    }

    #[test]
    fn edge_fractions() {
        let labels = vec![0, 1, 1, 0, 2];
        assert!(split_dataset(&labels, 0.0, 1.0, 1).unwrap().evaluation.is_empty());
        assert_eq!(split_dataset(&labels, 1.0, 0.0, 1).unwrap().test.len(), 0);
        assert!(split_dataset(&labels, 0.3, 0.3, 1).is_err());
    }

    #[test]
    fn folds_balance() {
        let labels: Vec<u8> = (0..50).map(|i| (i % 2) as u8).collect();
        let f = stratified_folds(&labels, 5, 3);
        for k in 0..5 {
            assert_eq!(f.iter().filter(|&&x| x == k).count(), 10);
        }
    }
}
