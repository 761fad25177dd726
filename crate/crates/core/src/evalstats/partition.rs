//! Partitions, the Move/Join distance and MoJoFM.
//!
//! `mno(A, B)` tags every group of `A` with a group of `B`; objects not in
//! their tag's group must be moved and groups sharing a tag must be joined.
//! The optimal tagging is found with a maximum-weight bipartite matching.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest object count for which the MoJoFM denominator is enumerated.
pub const ENUMERATION_LIMIT: usize = 10;

/// A grouping of named objects. Objects are kept sorted and labels in
/// first-occurrence order, so equal groupings compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    objects: Vec<String>,
    labels: Vec<usize>,
}

/// Relabels to first-occurrence order (a restricted growth string).
pub fn canonical_labels<L: Ord + Clone>(labels: &[L]) -> Vec<usize> {
    let mut seen: BTreeMap<L, usize> = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = seen.len();
            *seen.entry(l.clone()).or_insert(next)
        })
        .collect()
}

impl Partition {
    pub fn from_labels<L: Ord + Clone>(pairs: impl IntoIterator<Item = (String, L)>) -> Result<Self> {
        let mut pairs: Vec<(String, L)> = pairs.into_iter().collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput(format!("object `{}` labeled twice", w[0].0)));
        }
        let labels: Vec<L> = pairs.iter().map(|p| p.1.clone()).collect();
        Ok(Partition { labels: canonical_labels(&labels), objects: pairs.into_iter().map(|p| p.0).collect() })
    }

    pub fn from_groups<S: AsRef<str>>(groups: &[Vec<S>]) -> Result<Self> {
        if groups.iter().any(Vec::is_empty) {
            return Err(Error::InvalidInput("partition groups must be non-empty".into()));
        }
        Partition::from_labels(
            groups
                .iter()
                .enumerate()
                .flat_map(|(g, members)| members.iter().map(move |m| (m.as_ref().to_string(), g))),
        )
    }

    /// Objects `0..labels.len()` named by their index, zero-padded.
    pub fn from_index_labels(labels: &[usize]) -> Self {
        let width = labels.len().to_string().len();
        let pairs = labels.iter().enumerate().map(|(i, l)| (format!("{i:0width$}"), *l));
        Partition::from_labels(pairs).expect("indices are unique")
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn n_groups(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    /// Canonical labels aligned with [`Partition::objects`].
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn groups(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.n_groups()];
        for (o, l) in self.objects.iter().zip(&self.labels) {
            out[*l].push(o.as_str());
        }
        out
    }

    /// Group sizes, largest first.
    pub fn size_profile(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_groups()];
        self.labels.iter().for_each(|l| sizes[*l] += 1);
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}

fn check_same_objects(a: &Partition, b: &Partition) -> Result<()> {
    if a.objects != b.objects {
        let missing = a
            .objects
            .iter()
            .find(|o| b.objects.binary_search(o).is_err())
            .or_else(|| b.objects.iter().find(|o| a.objects.binary_search(o).is_err()));
        return Err(Error::InvalidInput(format!(
            "partitions cover different objects (e.g. `{}`)",
            missing.map_or("?", |s| s.as_str())
        )));
    }
    Ok(())
}

/// Maximum total weight of a matching between rows and columns of a
/// non-negative weight matrix (Hungarian method with potentials).
pub fn max_weight_matching(w: &[Vec<i64>]) -> i64 {
    let rows = w.len();
    let cols = w.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0;
    }
    if rows > cols {
        let t: Vec<Vec<i64>> = (0..cols).map(|c| (0..rows).map(|r| w[r][c]).collect()).collect();
        return max_weight_matching(&t);
    }
    const INF: i64 = i64::MAX / 4;
    let cost = |i: usize, j: usize| -w[i - 1][j - 1];
    let mut u = vec![0i64; rows + 1];
    let mut v = vec![0i64; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=cols).filter(|&j| p[j] != 0).map(|j| w[p[j] - 1][j - 1]).sum()
}

/// `mno` on canonical label vectors over the same objects.
///
/// With overlap `o[i][j]` between group `i` of A and group `j` of B, a
/// tagging scores `distinct tags + sum of overlaps` and
/// `mno = n + groups(A) - best score`. Every A group may take its largest
/// overlap; the matching decides which groups get a tag of their own, each
/// worth `o[i][j] + 1 - max_j o[i][j]`.
pub fn mno_labels(a: &[usize], b: &[usize]) -> usize {
    let la = a.iter().max().map_or(0, |m| m + 1);
    let lb = b.iter().max().map_or(0, |m| m + 1);
    let mut overlap = vec![vec![0i64; lb]; la];
    for (&x, &y) in a.iter().zip(b) {
        overlap[x][y] += 1;
    }
    let best: Vec<i64> = overlap.iter().map(|row| row.iter().copied().max().unwrap_or(0)).collect();
    let gains: Vec<Vec<i64>> = overlap
        .iter()
        .zip(&best)
        .map(|(row, m)| row.iter().map(|o| (o + 1 - m).max(0)).collect())
        .collect();
    let score = best.iter().sum::<i64>() + max_weight_matching(&gains);
    (a.len() as i64 + la as i64 - score) as usize
}

/// Minimum number of Move and Join operations turning `a` into `b`.
pub fn mno(a: &Partition, b: &Partition) -> Result<usize> {
    check_same_objects(a, b)?;
    Ok(mno_labels(&a.labels, &b.labels))
}

/// Calls `f` with every set partition of `n` objects as a restricted growth
/// string.
pub fn for_each_set_partition(n: usize, mut f: impl FnMut(&[usize])) {
    fn rec(labels: &mut Vec<usize>, n: usize, next: usize, f: &mut dyn FnMut(&[usize])) {
        if labels.len() == n {
            f(labels);
            return;
        }
        for l in 0..=next {
            labels.push(l);
            rec(labels, n, next.max(l + 1), f);
            labels.pop();
        }
    }
    rec(&mut Vec::with_capacity(n), n, 0, &mut f);
}

fn labels_for_profile(profile: &[usize]) -> Vec<usize> {
    profile.iter().enumerate().flat_map(|(g, &s)| std::iter::repeat_n(g, s)).collect()
}

/// Largest `mno(A, B)` over all partitions `A`, by enumeration.
pub fn max_mno_enumerated(profile: &[usize]) -> usize {
    let b = labels_for_profile(profile);
    let mut best = 0;
    for_each_set_partition(b.len(), |a| best = best.max(mno_labels(a, &b)));
    best
}

/// Closed form for the largest `mno(A, B)`: with B's group sizes
/// `s_1 >= ... >= s_m` (and `s_{m+1} = 0`), the farthest A splits the `q`
/// largest groups into singletons and lumps everything else together,
/// giving `max_q (n - q - s_{q+1})`.
pub fn max_mno_closed_form(profile: &[usize]) -> usize {
    let n: usize = profile.iter().sum();
    let mut sizes = profile.to_vec();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    (0..=sizes.len())
        .map(|q| n - q - sizes.get(q).copied().unwrap_or(0))
        .max()
        .unwrap_or(0)
}

/// Integer partitions of `n`, parts in non-increasing order.
pub fn integer_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 0 {
            out.push(cur.clone());
            return;
        }
        for k in (1..=n.min(max)).rev() {
            cur.push(k);
            rec(n - k, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// Checks the closed form against enumeration for every group-size profile
/// of up to `max_n` objects.
pub fn validate_closed_form(max_n: usize) -> std::result::Result<(), String> {
    use rayon::prelude::*;
    let profiles: Vec<Vec<usize>> = (1..=max_n).flat_map(integer_partitions).collect();
    profiles.par_iter().try_for_each(|p| {
        let (enumerated, closed) = (max_mno_enumerated(p), max_mno_closed_form(p));
        if enumerated == closed {
            Ok(())
        } else {
            Err(format!("profile {p:?}: enumeration {enumerated}, closed form {closed}"))
        }
    })
}

fn closed_form_validated() -> &'static std::result::Result<(), String> {
    static CHECK: OnceLock<std::result::Result<(), String>> = OnceLock::new();
    CHECK.get_or_init(|| validate_closed_form(ENUMERATION_LIMIT))
}

/// `max(mno(∀A, B))`: enumerated for up to [`ENUMERATION_LIMIT`] objects,
/// otherwise the closed form, which is first checked against enumeration on
/// all smaller cases and refused if the check fails.
pub fn max_mno(b: &Partition) -> Result<usize> {
    let profile = b.size_profile();
    if b.n_objects() <= ENUMERATION_LIMIT {
        static CACHE: OnceLock<Mutex<HashMap<Vec<usize>, usize>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(v) = cache.lock().expect("cache lock").get(&profile) {
            return Ok(*v);
        }
        let v = max_mno_enumerated(&profile);
        cache.lock().expect("cache lock").insert(profile, v);
        return Ok(v);
    }
    match closed_form_validated() {
        Ok(()) => Ok(max_mno_closed_form(&profile)),
        Err(e) => Err(Error::Undefined(format!("closed-form MoJoFM denominator failed validation: {e}"))),
    }
}

/// `100 - mno(A, B) / max(mno(∀A, B)) * 100`.
pub fn mojo_fm(a: &Partition, b: &Partition) -> Result<f64> {
    let distance = mno(a, b)?;
    let denominator = max_mno(b)?;
    if denominator == 0 {
        return Err(Error::Undefined(format!(
            "MoJoFM needs at least two objects (got {})",
            b.n_objects()
        )));
    }
    Ok(100.0 - distance as f64 / denominator as f64 * 100.0)
}
