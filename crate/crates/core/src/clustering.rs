//! Context and issue clustering.
//!
//! Segments are compared by their keyframe histograms (context) and, for
//! issues, additionally by their tf-idf text. DBSCAN and OPTICS consume the
//! pairwise measure directly; Mean Shift works on each segment's mean
//! keyframe histogram since it needs a vector space.
//!
//! The average pairwise keyframe similarity is not a metric (a segment with
//! varied keyframes is less than fully similar to itself), so self-distance
//! is pinned to 0 and the density methods treat the result as a plain
//! dissimilarity.

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::{Ordering, Reverse};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evalstats::Partition;
use crate::frames::VideoTrack;
use crate::segmentation::Segment;
use crate::{Error, Result};

/// Symmetric pairwise dissimilarities in `[0, 1]` between named items.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds the matrix from `f(i, j)` evaluated once per unordered pair.
    pub fn from_fn(ids: Vec<String>, f: impl Fn(usize, usize) -> Result<f64> + Sync) -> Result<Self> {
        let n = ids.len();
        let upper: Vec<(usize, usize, f64)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j).map(|d| (i, j, d)))
            .collect::<Result<_>>()?;
        let mut values = vec![0.0; n * n];
        for (i, j, d) in upper {
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
        DistanceMatrix::new(ids, values)
    }

    /// Takes a row-major `n × n` matrix and checks its invariants.
    pub fn new(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let m = DistanceMatrix { ids, values };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ids.len();
        if self.values.len() != n * n {
            return Err(Error::Invariant(format!("distance matrix has {} entries for {n} items", self.values.len())));
        }
        let mut sorted: Vec<&String> = self.ids.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Invariant(format!("duplicate item id `{}`", w[0])));
        }
        for i in 0..n {
            if self.get(i, i) != 0.0 {
                return Err(Error::Invariant(format!("non-zero self distance for `{}`", self.ids[i])));
            }
            for j in i + 1..n {
                let d = self.get(i, j);
                if !d.is_finite() || !(0.0..=1.0).contains(&d) || d != self.get(j, i) {
                    return Err(Error::Invariant(format!(
                        "bad distance {d} between `{}` and `{}`",
                        self.ids[i], self.ids[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    /// Same items, reordered by `perm` (new position `k` holds old item `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let ids = perm.iter().map(|&p| self.ids[p].clone()).collect();
        let values = (0..n * n).map(|k| self.get(perm[k / n], perm[k % n])).collect();
        DistanceMatrix::new(ids, values)
    }
}

/// Keyframe histograms of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextItem {
    pub segment_id: String,
    pub keyframes: Vec<Vec<f64>>,
}

impl ContextItem {
    /// Collects the histograms of the segment's keyframes from its track.
    pub fn from_segment(segment: &Segment, track: &VideoTrack) -> Result<Self> {
        let keyframes = segment
            .keyframe_timestamps
            .iter()
            .map(|&ts| {
                track.frame_at(ts).map(|f| f.histogram.clone()).ok_or_else(|| {
                    Error::Invariant(format!("keyframe {ts} of `{}` missing from track", segment.segment_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ContextItem { segment_id: segment.segment_id.clone(), keyframes })
    }

    /// Mean keyframe histogram, the segment's point for Mean Shift.
    pub fn embedding(&self) -> Vec<f64> {
        let dim = self.keyframes.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; dim];
        for k in &self.keyframes {
            mean.iter_mut().zip(k).for_each(|(m, v)| *m += v);
        }
        let n = self.keyframes.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

/// Histogram intersection of two 3-block normalized histograms, in `[0, 1]`.
pub fn histogram_similarity(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| x.min(*y)).sum::<f64>() / 3.0).clamp(0.0, 1.0)
}

/// One minus the mean intersection over all keyframe pairs; 0 for identical
/// keyframe lists.
pub fn context_distance(a: &ContextItem, b: &ContextItem) -> Result<f64> {
    for item in [a, b] {
        if item.keyframes.is_empty() {
            return Err(Error::InvalidInput(format!("segment `{}` has no keyframes", item.segment_id)));
        }
    }
    if a.keyframes == b.keyframes {
        return Ok(0.0);
    }
    let total: f64 = a.keyframes.iter().flat_map(|x| b.keyframes.iter().map(move |y| histogram_similarity(x, y))).sum();
    Ok((1.0 - total / (a.keyframes.len() * b.keyframes.len()) as f64).clamp(0.0, 1.0))
}

/// Cosine distance in `[0, 1]` for non-negative vectors. A zero vector is at
/// distance 1 from anything except an identical vector.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let (na, nb) = (a.iter().map(|x| x * x).sum::<f64>().sqrt(), b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na * nb)).clamp(0.0, 1.0)
}

/// A segment as seen by issue clustering: tf-idf text plus keyframes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueItem {
    pub context: ContextItem,
    pub text: Vec<f64>,
}

/// `alpha · cosine(text) + (1 - alpha) · context`.
pub fn issue_distance(a: &IssueItem, b: &IssueItem, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")));
    }
    let visual = context_distance(&a.context, &b.context)?;
    Ok((alpha * cosine_distance(&a.text, &b.text) + (1.0 - alpha) * visual).clamp(0.0, 1.0))
}

/// Clustering algorithm and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ClusterAlgorithm {
    Dbscan { eps: f64, min_pts: usize },
    Optics { min_pts: usize, eps_max: f64, eps_cut: f64 },
    MeanShift { bandwidth: f64, tol: f64, max_iter: usize },
}

impl ClusterAlgorithm {
    /// Defaults for context grouping. Keyframes of one scene sit well below
    /// 0.3 from each other while different scenes are far above it.
    pub const DEFAULT_DBSCAN: ClusterAlgorithm = ClusterAlgorithm::Dbscan { eps: 0.3, min_pts: 2 };
    pub const DEFAULT_OPTICS: ClusterAlgorithm = ClusterAlgorithm::Optics { min_pts: 2, eps_max: 1.0, eps_cut: 0.3 };
    /// Bandwidth is Euclidean over mean 48-bin histograms.
    pub const DEFAULT_MEAN_SHIFT: ClusterAlgorithm =
        ClusterAlgorithm::MeanShift { bandwidth: 0.3, tol: 1e-9, max_iter: 300 };

    pub fn name(&self) -> &'static str {
        match self {
            ClusterAlgorithm::Dbscan { .. } => "dbscan",
            ClusterAlgorithm::Optics { .. } => "optics",
            ClusterAlgorithm::MeanShift { .. } => "mean_shift",
        }
    }

    /// Default parameters for an algorithm name.
    pub fn default_for(name: &str) -> Result<Self> {
        match name {
            "dbscan" => Ok(ClusterAlgorithm::DEFAULT_DBSCAN),
            "optics" => Ok(ClusterAlgorithm::DEFAULT_OPTICS),
            "mean_shift" | "meanshift" => Ok(ClusterAlgorithm::DEFAULT_MEAN_SHIFT),
            other => Err(Error::Config(format!("unknown clustering algorithm `{other}`"))),
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let entries: Vec<(&str, f64)> = match *self {
            ClusterAlgorithm::Dbscan { eps, min_pts } => vec![("eps", eps), ("min_pts", min_pts as f64)],
            ClusterAlgorithm::Optics { min_pts, eps_max, eps_cut } => {
                vec![("min_pts", min_pts as f64), ("eps_max", eps_max), ("eps_cut", eps_cut)]
            }
            ClusterAlgorithm::MeanShift { bandwidth, tol, max_iter } => {
                vec![("bandwidth", bandwidth), ("tol", tol), ("max_iter", max_iter as f64)]
            }
        };
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    pub member_segment_ids: Vec<String>,
    pub medoid: String,
}

/// Clustering result. Cluster ids run from 0 in order of each cluster's
/// smallest member id; members are sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub algorithm: String,
    pub params: BTreeMap<String, f64>,
    pub clusters: Vec<Cluster>,
    pub noise: Vec<String>,
}

impl ClusterAssignment {
    pub fn empty(algorithm: &ClusterAlgorithm) -> Self {
        ClusterAssignment {
            algorithm: algorithm.name().into(),
            params: algorithm.params(),
            clusters: Vec::new(),
            noise: Vec::new(),
        }
    }

    /// Builds the assignment from per-item labels (`None` = noise); medoids
    /// minimise summed `dist` within the cluster, ties to the lowest id.
    fn from_labels(
        algorithm: &ClusterAlgorithm,
        ids: &[String],
        labels: &[Option<usize>],
        dist: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut noise = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            match l {
                Some(c) => groups.entry(*c).or_default().push(i),
                None => noise.push(ids[i].clone()),
            }
        }
        let mut members: Vec<Vec<usize>> = groups.into_values().collect();
        for m in &mut members {
            m.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        }
        members.sort_by(|a, b| ids[a[0]].cmp(&ids[b[0]]));
        noise.sort();
        let clusters = members
            .iter()
            .enumerate()
            .map(|(id, m)| {
                let medoid = m
                    .iter()
                    .map(|&i| (m.iter().map(|&j| dist(i, j)).sum::<f64>(), i))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .map(|(_, i)| ids[i].clone())
                    .expect("clusters are non-empty");
                Cluster { id, member_segment_ids: m.iter().map(|&i| ids[i].clone()).collect(), medoid }
            })
            .collect();
        ClusterAssignment { algorithm: algorithm.name().into(), params: algorithm.params(), clusters, noise }
    }

    pub fn n_items(&self) -> usize {
        self.noise.len() + self.clusters.iter().map(|c| c.member_segment_ids.len()).sum::<usize>()
    }

    /// Cluster id of an item, `None` for noise or unknown items.
    pub fn cluster_of(&self, id: &str) -> Option<usize> {
        self.clusters.iter().find(|c| c.member_segment_ids.iter().any(|m| m == id)).map(|c| c.id)
    }

    /// As a partition with every noise item in a group of its own.
    pub fn to_partition(&self) -> Result<Partition> {
        let mut groups: Vec<Vec<&str>> =
            self.clusters.iter().map(|c| c.member_segment_ids.iter().map(String::as_str).collect()).collect();
        groups.extend(self.noise.iter().map(|n| vec![n.as_str()]));
        Partition::from_groups(&groups)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_density_params(eps: f64, min_pts: usize) -> Result<()> {
    if !(eps > 0.0) || min_pts == 0 {
        return Err(Error::InvalidInput(format!("need eps > 0 and min_pts >= 1 (got {eps}, {min_pts})")));
    }
    Ok(())
}

/// Items visited in id order so that results do not depend on input order.
fn id_order(ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    order
}

fn dbscan_labels(d: &DistanceMatrix, eps: f64, min_pts: usize) -> (Vec<Option<usize>>, Vec<bool>) {
    let n = d.len();
    let order = id_order(d.ids());
    let neighbours: Vec<Vec<usize>> =
        (0..n).map(|i| order.iter().copied().filter(|&j| d.get(i, j) <= eps).collect()).collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut labels = vec![None; n];
    let mut next = 0;
    for &seed in &order {
        if !core[seed] || labels[seed].is_some() {
            continue;
        }
        labels[seed] = Some(next);
        let mut stack = vec![seed];
        while let Some(p) = stack.pop() {
            for &q in &neighbours[p] {
                if core[q] && labels[q].is_none() {
                    labels[q] = Some(next);
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if !core[i] {
            // neighbours are in id order, so the first core one has the lowest id
            labels[i] = neighbours[i].iter().find(|&&q| core[q]).and_then(|&q| labels[q]);
        }
    }
    (labels, core)
}

/// DBSCAN over a dissimilarity matrix. Neighbourhoods include the point
/// itself; a border point joins the cluster of its lowest-id core neighbour.
pub fn dbscan(d: &DistanceMatrix, eps: f64, min_pts: usize) -> Result<ClusterAssignment> {
    check_density_params(eps, min_pts)?;
    let (labels, _) = dbscan_labels(d, eps, min_pts);
    Ok(ClusterAssignment::from_labels(&ClusterAlgorithm::Dbscan { eps, min_pts }, d.ids(), &labels, |i, j| d.get(i, j)))
}

/// Core points of DBSCAN at `eps`.
pub fn dbscan_core_points(d: &DistanceMatrix, eps: f64, min_pts: usize) -> Vec<bool> {
    dbscan_labels(d, eps, min_pts).1
}

/// OPTICS ordering with reachability and core distances (`None` = undefined).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticsOrdering {
    pub order: Vec<usize>,
    pub reachability: Vec<Option<f64>>,
    pub core_distance: Vec<Option<f64>>,
}

#[derive(PartialEq)]
struct Candidate(f64, Reverse<usize>);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (reachability, id rank)
        other.0.total_cmp(&self.0).then_with(|| self.1.cmp(&other.1))
    }
}

pub fn optics_ordering(d: &DistanceMatrix, min_pts: usize, eps_max: f64) -> OpticsOrdering {
    let n = d.len();
    let order_by_id = id_order(d.ids());
    let mut rank = vec![0; n];
    order_by_id.iter().enumerate().for_each(|(r, &i)| rank[i] = r);
    let core_distance: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let mut ds: Vec<f64> = (0..n).map(|j| d.get(i, j)).filter(|&x| x <= eps_max).collect();
            ds.sort_by(f64::total_cmp);
            ds.get(min_pts - 1).copied()
        })
        .collect();
    let mut reachability: Vec<Option<f64>> = vec![None; n];
    let mut processed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for &start in &order_by_id {
        if processed[start] {
            continue;
        }
        let mut heap = BinaryHeap::new();
        heap.push(Candidate(f64::INFINITY, Reverse(rank[start])));
        while let Some(Candidate(_, Reverse(r))) = heap.pop() {
            let p = order_by_id[r];
            if processed[p] {
                continue;
            }
            processed[p] = true;
            order.push(p);
            let Some(core) = core_distance[p] else { continue };
            for q in 0..n {
                let dq = d.get(p, q);
                if processed[q] || dq > eps_max {
                    continue;
                }
                let reach = core.max(dq);
                if reachability[q].is_none_or(|old| reach < old) {
                    reachability[q] = Some(reach);
                    heap.push(Candidate(reach, Reverse(rank[q])));
                }
            }
        }
    }
    OpticsOrdering { order, reachability, core_distance }
}

/// OPTICS with clusters extracted by cutting reachability at `eps_cut`
/// (equivalent to DBSCAN at `eps_cut` up to border ties). Core and noise
/// sets match DBSCAN exactly.
pub fn optics(d: &DistanceMatrix, min_pts: usize, eps_max: f64, eps_cut: f64) -> Result<ClusterAssignment> {
    check_density_params(eps_cut, min_pts)?;
    if eps_cut > eps_max {
        return Err(Error::InvalidInput(format!("eps_cut {eps_cut} exceeds eps_max {eps_max}")));
    }
    let ordering = optics_ordering(d, min_pts, eps_max);
    let mut labels = vec![None; d.len()];
    let mut current: Option<usize> = None;
    let mut next = 0;
    for &p in &ordering.order {
        if ordering.reachability[p].is_none_or(|r| r > eps_cut) {
            if ordering.core_distance[p].is_some_and(|c| c <= eps_cut) {
                current = Some(next);
                next += 1;
                labels[p] = current;
            } else {
                current = None;
            }
        } else {
            labels[p] = current;
        }
    }
    // A border point ordered before its core neighbour was never reached
    // within eps_cut; give it the DBSCAN assignment (lowest-id core neighbour).
    let is_core = |i: usize| ordering.core_distance[i].is_some_and(|c| c <= eps_cut);
    let by_id = id_order(d.ids());
    for p in 0..d.len() {
        if labels[p].is_none() && !is_core(p) {
            labels[p] = by_id.iter().find(|&&q| is_core(q) && d.get(p, q) <= eps_cut).and_then(|&q| labels[q]);
        }
    }
    let algo = ClusterAlgorithm::Optics { min_pts, eps_max, eps_cut };
    Ok(ClusterAssignment::from_labels(&algo, d.ids(), &labels, |i, j| d.get(i, j)))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// One flat-kernel step: the mean of all points within `bandwidth` of `x`.
pub fn mean_shift_step(points: &[Vec<f64>], x: &[f64], bandwidth: f64) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; x.len()];
    let mut count = 0usize;
    for p in points.iter().filter(|p| euclidean(p, x) <= bandwidth) {
        sum.iter_mut().zip(p).for_each(|(s, v)| *s += v);
        count += 1;
    }
    (count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect())
}

/// Converged modes of every point.
pub fn mean_shift_modes(points: &[Vec<f64>], bandwidth: f64, tol: f64, max_iter: usize) -> Vec<Vec<f64>> {
    points
        .par_iter()
        .map(|start| {
            let mut x = start.clone();
            for _ in 0..max_iter {
                let Some(next) = mean_shift_step(points, &x, bandwidth) else { break };
                let shift = euclidean(&next, &x);
                x = next;
                if shift < tol {
                    break;
                }
            }
            x
        })
        .collect()
}

/// Flat-kernel Mean Shift; modes closer than `bandwidth / 2` are merged in
/// point order. Every point belongs to a cluster.
pub fn mean_shift(
    ids: &[String],
    points: &[Vec<f64>],
    bandwidth: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ClusterAssignment> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidInput(format!("bandwidth must be positive (got {bandwidth})")));
    }
    if ids.len() != points.len() {
        return Err(Error::InvalidInput("ids and points differ in length".into()));
    }
    let modes = mean_shift_modes(points, bandwidth, tol, max_iter);
    let mut centres: Vec<&Vec<f64>> = Vec::new();
    let labels: Vec<Option<usize>> = modes
        .iter()
        .map(|m| {
            Some(centres.iter().position(|c| euclidean(c, m) < bandwidth / 2.0).unwrap_or_else(|| {
                centres.push(m);
                centres.len() - 1
            }))
        })
        .collect();
    let algo = ClusterAlgorithm::MeanShift { bandwidth, tol, max_iter };
    Ok(ClusterAssignment::from_labels(&algo, ids, &labels, |i, j| euclidean(&points[i], &points[j])))
}

fn run_algorithm(
    algo: &ClusterAlgorithm,
    d: &DistanceMatrix,
    points: impl FnOnce() -> Vec<Vec<f64>>,
) -> Result<ClusterAssignment> {
    match *algo {
        ClusterAlgorithm::Dbscan { eps, min_pts } => dbscan(d, eps, min_pts),
        ClusterAlgorithm::Optics { min_pts, eps_max, eps_cut } => optics(d, min_pts, eps_max, eps_cut),
        ClusterAlgorithm::MeanShift { bandwidth, tol, max_iter } => {
            let mut out = mean_shift(d.ids(), &points(), bandwidth, tol, max_iter)?;
            // report medoids under the same measure the density methods use
            let index: BTreeMap<&str, usize> = d.ids().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
            for c in &mut out.clusters {
                let members: Vec<usize> = c.member_segment_ids.iter().map(|m| index[m.as_str()]).collect();
                let best = members
                    .iter()
                    .map(|&i| (members.iter().map(|&j| d.get(i, j)).sum::<f64>(), i))
                    .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| d.ids()[a.1].cmp(&d.ids()[b.1])))
                    .expect("non-empty");
                c.medoid = d.ids()[best.1].clone();
            }
            Ok(out)
        }
    }
}

/// Context distance matrix over segments.
pub fn context_matrix(items: &[ContextItem]) -> Result<DistanceMatrix> {
    let ids = items.iter().map(|i| i.segment_id.clone()).collect();
    DistanceMatrix::from_fn(ids, |i, j| context_distance(&items[i], &items[j]))
}

/// Groups informative segments into visual contexts.
pub fn group_by_context(items: &[ContextItem], algo: &ClusterAlgorithm) -> Result<ClusterAssignment> {
    if items.is_empty() {
        log::warn!("no informative segments to group by context");
        return Ok(ClusterAssignment::empty(algo));
    }
    let d = context_matrix(items)?;
    run_algorithm(algo, &d, || items.iter().map(ContextItem::embedding).collect())
}

/// Issue distance matrix over segments.
pub fn issue_matrix(items: &[IssueItem], alpha: f64) -> Result<DistanceMatrix> {
    let ids = items.iter().map(|i| i.context.segment_id.clone()).collect();
    DistanceMatrix::from_fn(ids, |i, j| issue_distance(&items[i], &items[j], alpha))
}

/// Point used by Mean Shift for issue clustering: the L2-normalized text
/// vector scaled by `sqrt(alpha)` next to the mean histogram scaled by
/// `sqrt(1 - alpha)`.
pub fn issue_embedding(item: &IssueItem, alpha: f64) -> Vec<f64> {
    let norm = item.text.iter().map(|v| v * v).sum::<f64>().sqrt();
    let text_scale = if norm > 0.0 { alpha.sqrt() / norm } else { 0.0 };
    item.text
        .iter()
        .map(|v| v * text_scale)
        .chain(item.context.embedding().into_iter().map(|v| v * (1.0 - alpha).sqrt()))
        .collect()
}

/// Clusters segments of one context and one issue category.
pub fn cluster_issues(items: &[IssueItem], alpha: f64, algo: &ClusterAlgorithm) -> Result<ClusterAssignment> {
    if items.is_empty() {
        return Ok(ClusterAssignment::empty(algo));
    }
    let d = issue_matrix(items, alpha)?;
    run_algorithm(algo, &d, || items.iter().map(|i| issue_embedding(i, alpha)).collect())
}
