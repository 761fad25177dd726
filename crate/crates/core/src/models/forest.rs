//! Random forest of Gini CART trees.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Hyper, N_LABELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { probs: [f64; N_LABELS] },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Arena of nodes; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_proba(&self, x: &[f64]) -> [f64; N_LABELS] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { probs } => return *probs,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn predict_proba(&self, x: &[f64]) -> [f64; N_LABELS] {
        let mut acc = [0.0; N_LABELS];
        for t in &self.trees {
            acc.iter_mut().zip(t.predict_proba(x)).for_each(|(a, p)| *a += p);
        }
        let n = self.trees.len().max(1) as f64;
        acc.map(|a| a / n)
    }
}

fn class_counts(y: &[usize], rows: &[usize]) -> [usize; N_LABELS] {
    let mut c = [0; N_LABELS];
    rows.iter().for_each(|&r| c[y[r]] += 1);
    c
}

fn gini(counts: &[usize; N_LABELS], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_candidates: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    rng: R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn leaf(&mut self, counts: &[usize; N_LABELS], n: usize) -> usize {
        let probs = counts.map(|c| c as f64 / n as f64);
        self.nodes.push(Node::Leaf { probs });
        self.nodes.len() - 1
    }

    /// Best (feature, threshold, weighted child impurity) among the sampled
    /// candidate features.
    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let d = self.x[0].len();
        let candidates = sample(&mut self.rng, d, self.n_candidates.min(d));
        let total = class_counts(self.y, rows);
        let n = rows.len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = rows.to_vec();
        for f in candidates.iter() {
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = [0usize; N_LABELS];
            for i in 0..n - 1 {
                left[self.y[sorted[i]]] += 1;
                let (lo, hi) = (self.x[sorted[i]][f], self.x[sorted[i + 1]][f]);
                if lo == hi {
                    continue;
                }
                let mut right = total;
                right.iter_mut().zip(&left).for_each(|(r, l)| *r -= l);
                let (nl, nr) = (i + 1, n - i - 1);
                let score = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                if best.is_none_or(|b| score < b.2) {
                    best = Some((f, lo + (hi - lo) / 2.0, score));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = class_counts(self.y, &rows);
        let n = rows.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || n < self.min_leaf || self.max_depth.is_some_and(|m| depth >= m) {
            return self.leaf(&counts, n);
        }
        match self.best_split(&rows) {
            Some((feature, threshold, score)) if score < gini(&counts, n) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
                let at = self.nodes.len();
                self.nodes.push(Node::Leaf { probs: [0.0; N_LABELS] });
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[at] = Node::Split { feature, threshold, left, right };
                at
            }
            _ => self.leaf(&counts, n),
        }
    }
}

/// One tree per sub-stream of `seed`, so trees can be fitted in parallel.
pub fn fit(x: &[Vec<f64>], y: &[usize], hyper: &Hyper, seed: u64) -> Forest {
    let d = x.first().map_or(0, Vec::len);
    let n_candidates = ((d as f64).sqrt().ceil() as usize).max(1);
    let trees = (0..hyper.trees.max(1))
        .into_par_iter()
        .map(|t| {
            let mut rng = crate::rng::substream(seed, t as u64);
            let rows: Vec<usize> = if hyper.bootstrap {
                (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect()
            } else {
                (0..x.len()).collect()
            };
            let mut b = Builder {
                x,
                y,
                n_candidates,
                min_leaf: hyper.min_leaf,
                max_depth: hyper.max_depth,
                rng,
                nodes: Vec::new(),
            };
            if d == 0 {
                let counts = class_counts(y, &rows);
                b.leaf(&counts, rows.len());
            } else {
                b.grow(rows, 0);
            }
            Tree { nodes: b.nodes }
        })
        .collect();
    Forest { trees }
}
