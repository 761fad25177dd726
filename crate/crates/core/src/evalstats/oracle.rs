//! Brute-force oracles for cross-checking the fast statistics. Only built
//! with the `oracle` feature.

use std::collections::{HashSet, VecDeque};

use super::partition::{canonical_labels, for_each_set_partition, Partition};
use crate::Result;

/// `mno` by trying every assignment of B-group tags to A's groups: the
/// result is `n + groups(A) - max(distinct tags + Σ overlap(group, tag))`.
pub fn mno_by_tag_enumeration(a: &Partition, b: &Partition) -> Result<usize> {
    super::partition::mno(a, b)?;
    let (la, lb) = (a.n_groups(), b.n_groups());
    let mut overlap = vec![vec![0usize; lb]; la];
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        overlap[x][y] += 1;
    }
    let mut tags = vec![0usize; la];
    let mut best = 0;
    loop {
        let distinct: HashSet<usize> = tags.iter().copied().collect();
        let score = distinct.len() + tags.iter().enumerate().map(|(i, &t)| overlap[i][t]).sum::<usize>();
        best = best.max(score);
        // odometer over lb^la assignments
        let mut i = 0;
        while i < la {
            tags[i] += 1;
            if tags[i] < lb {
                break;
            }
            tags[i] = 0;
            i += 1;
        }
        if i == la {
            break;
        }
    }
    Ok(a.n_objects() + la - best)
}

/// `mno` by breadth-first search over single Move and Join operations.
/// Exponential; intended for at most six objects.
pub fn mno_by_search(a: &Partition, b: &Partition) -> Result<usize> {
    super::partition::mno(a, b)?;
    let target = b.labels().to_vec();
    let start = a.labels().to_vec();
    let mut seen: HashSet<Vec<usize>> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((state, d)) = queue.pop_front() {
        if state == target {
            return Ok(d);
        }
        let groups = state.iter().max().map_or(0, |m| m + 1);
        let mut next_states = Vec::new();
        for obj in 0..state.len() {
            for g in 0..=groups {
                if g != state[obj] {
                    let mut s = state.clone();
                    s[obj] = g;
                    next_states.push(canonical_labels(&s));
                }
            }
        }
        for g1 in 0..groups {
            for g2 in g1 + 1..groups {
                let s: Vec<usize> = state.iter().map(|&l| if l == g2 { g1 } else { l }).collect();
                next_states.push(canonical_labels(&s));
            }
        }
        for s in next_states {
            if seen.insert(s.clone()) {
                queue.push_back((s, d + 1));
            }
        }
    }
    unreachable!("every partition is reachable by moves")
}

/// `max(mno(∀A, B))` over every set partition A, without caching.
pub fn max_mno_by_enumeration(b: &Partition) -> usize {
    let mut best = 0;
    for_each_set_partition(b.n_objects(), |a| best = best.max(super::partition::mno_labels(a, b.labels())));
    best
}

/// Exact two-sided Mann-Whitney p-value by listing every choice of which
/// pooled observations form the first sample.
pub fn mann_whitney_p_by_enumeration(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (n, n1) = (pooled.len(), x.len());
    let centre = (x.len() * y.len()) as f64 / 2.0;
    let observed = (super::hypothesis::u_statistic(x, y) - centre).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let (first, second): (Vec<f64>, Vec<f64>) = {
            let (mut f, mut s) = (Vec::new(), Vec::new());
            for (i, v) in pooled.iter().enumerate() {
                if mask >> i & 1 == 1 { f.push(*v) } else { s.push(*v) }
            }
            (f, s)
        };
        total += 1;
        if (super::hypothesis::u_statistic(&first, &second) - centre).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalstats::partition::mno;

    #[test]
    fn oracles_agree_on_small_pairs() {
        let mut parts = Vec::new();
        for_each_set_partition(5, |l| parts.push(Partition::from_index_labels(l)));
        for a in parts.iter().step_by(3) {
            for b in parts.iter().step_by(7) {
                let fast = mno(a, b).unwrap();
                assert_eq!(fast, mno_by_tag_enumeration(a, b).unwrap());
                assert_eq!(fast, mno_by_search(a, b).unwrap());
            }
        }
    }

    #[test]
    fn exact_p_matches_listing() {
        let x = [1.0, 3.0, 3.0, 7.0];
        let y = [2.0, 3.0, 5.0, 8.0, 9.0];
        let fast = crate::evalstats::mann_whitney_u(&x, &y).unwrap().p_two_sided;
        assert!((fast - mann_whitney_p_by_enumeration(&x, &y)).abs() < 1e-12);
    }
}
