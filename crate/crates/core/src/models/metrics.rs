//! Accuracy, per-class precision/recall, one-vs-rest AUC and the confusion
//! matrix.

use serde::{Deserialize, Serialize};

use super::{argmax, IssueLabel, TrainedModel, N_LABELS};
use crate::{Error, Result};

/// `counts[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N_LABELS]; N_LABELS],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: IssueLabel,
    pub support: u64,
    /// TP / (TP + FP); 0 with `precision_defined = false` when nothing was
    /// predicted as this class.
    pub precision: f64,
    pub precision_defined: bool,
    pub recall: f64,
    pub recall_defined: bool,
    /// `None` when the test set lacks positives or negatives.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

impl Evaluation {
    pub fn macro_precision(&self) -> f64 {
        mean(self.per_class.iter().filter(|c| c.support > 0).map(|c| c.precision))
    }

    pub fn macro_recall(&self) -> f64 {
        mean(self.per_class.iter().filter(|c| c.support > 0).map(|c| c.recall))
    }

    pub fn macro_auc(&self) -> Option<f64> {
        let aucs: Vec<f64> = self.per_class.iter().filter_map(|c| c.auc).collect();
        (!aucs.is_empty()).then(|| mean(aucs.into_iter()))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Midranks (1-based) of `values`, ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve from the rank-sum of the positive scores.
pub fn rank_auc(positive: &[f64], negative: &[f64]) -> Option<f64> {
    if positive.is_empty() || negative.is_empty() {
        return None;
    }
    let pooled: Vec<f64> = positive.iter().chain(negative).copied().collect();
    let ranks = midranks(&pooled);
    let n_pos = positive.len() as f64;
    let rank_sum: f64 = ranks[..positive.len()].iter().sum();
    Some((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * negative.len() as f64))
}

/// Metrics from per-row class probabilities.
pub fn evaluate_probabilities(probs: &[[f64; N_LABELS]], y: &[IssueLabel]) -> Result<Evaluation> {
    if probs.is_empty() || probs.len() != y.len() {
        return Err(Error::InvalidInput(format!("{} predictions for {} labels", probs.len(), y.len())));
    }
    let mut confusion = ConfusionMatrix { counts: [[0; N_LABELS]; N_LABELS] };
    for (p, t) in probs.iter().zip(y) {
        confusion.counts[t.index()][argmax(p)] += 1;
    }
    let correct: u64 = (0..N_LABELS).map(|c| confusion.counts[c][c]).sum();
    let per_class = IssueLabel::ALL
        .iter()
        .map(|&label| {
            let c = label.index();
            let tp = confusion.counts[c][c];
            let predicted: u64 = (0..N_LABELS).map(|t| confusion.counts[t][c]).sum();
            let support: u64 = confusion.counts[c].iter().sum();
            let (pos, neg): (Vec<_>, Vec<_>) = probs.iter().zip(y).partition(|(_, t)| **t == label);
            let pos: Vec<f64> = pos.iter().map(|(p, _)| p[c]).collect();
            let neg: Vec<f64> = neg.iter().map(|(p, _)| p[c]).collect();
            ClassMetrics {
                label,
                support,
                precision: if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 },
                precision_defined: predicted > 0,
                recall: if support > 0 { tp as f64 / support as f64 } else { 0.0 },
                recall_defined: support > 0,
                auc: rank_auc(&pos, &neg),
            }
        })
        .collect();
    Ok(Evaluation { accuracy: correct as f64 / y.len() as f64, per_class, confusion })
}

pub fn evaluate(model: &TrainedModel, x: &[Vec<f64>], y: &[IssueLabel]) -> Result<Evaluation> {
    let probs = x.iter().map(|row| model.predict_proba_values(row)).collect::<Result<Vec<_>>>()?;
    evaluate_probabilities(&probs, y)
}
