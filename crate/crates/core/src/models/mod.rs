//! Segment classifiers over the five issue labels.
//!
//! Three model kinds share one [`TrainedModel`] envelope: multinomial
//! logistic regression, a Gini random forest and a one-hidden-layer ReLU
//! network. Inputs are standardized with statistics from the training rows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::{Error, Result};

pub mod forest;
pub mod logistic;
pub mod metrics;
pub mod mlp;

pub use metrics::{evaluate, ClassMetrics, ConfusionMatrix, Evaluation};

pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const N_LABELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueLabel {
    NonInformative,
    Logic,
    Presentation,
    Balance,
    Performance,
}

impl IssueLabel {
    /// Fixed label order used for probability vectors and tie-breaking.
    pub const ALL: [IssueLabel; N_LABELS] = [
        IssueLabel::NonInformative,
        IssueLabel::Logic,
        IssueLabel::Presentation,
        IssueLabel::Balance,
        IssueLabel::Performance,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<IssueLabel> {
        IssueLabel::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IssueLabel::NonInformative => "non_informative",
            IssueLabel::Logic => "logic",
            IssueLabel::Presentation => "presentation",
            IssueLabel::Balance => "balance",
            IssueLabel::Performance => "performance",
        }
    }

    pub fn is_informative(self) -> bool {
        self != IssueLabel::NonInformative
    }
}

impl fmt::Display for IssueLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IssueLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        IssueLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == norm || (norm == "noninformative" && *l == IssueLabel::NonInformative))
            .ok_or_else(|| Error::InvalidInput(format!("unknown issue label `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LogisticRegression,
    RandomForest,
    FeedForwardNet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::LogisticRegression, ModelKind::RandomForest, ModelKind::FeedForwardNet];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::RandomForest => "random_forest",
            ModelKind::FeedForwardNet => "feed_forward_net",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown model kind `{s}`")))
    }
}

/// Hyper-parameters for all kinds; each kind reads its own fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub lambda: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub trees: usize,
    pub min_leaf: usize,
    /// `None` grows trees until the leaf rule stops them.
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub nn_learning_rate: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            lambda: 1e-4,
            iterations: 500,
            learning_rate: 0.1,
            trees: 100,
            min_leaf: 2,
            max_depth: None,
            bootstrap: true,
            hidden: 64,
            epochs: 50,
            batch_size: 32,
            nn_learning_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Constant columns get unit scale.
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; d];
        for row in x {
            var.iter_mut().zip(row.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m).powi(2) / n);
        }
        let std = var.into_iter().map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 }).collect();
        Standardization { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    LogisticRegression(logistic::LogisticParams),
    RandomForest(forest::Forest),
    FeedForwardNet(mlp::NetParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub schema_version: u32,
    pub kind: ModelKind,
    pub hyper: Hyper,
    pub feature_names: Vec<String>,
    pub label_order: Vec<IssueLabel>,
    pub standardization: Standardization,
    pub params: ModelParams,
}

fn check_training_data(x: &[Vec<f64>], y: &[IssueLabel], names: &[String]) -> Result<()> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidInput(format!("{} rows but {} labels", x.len(), y.len())));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != names.len() {
            return Err(Error::InvalidInput(format!("row {i} has {} values for {} names", row.len(), names.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("row {i} contains NaN or infinite values")));
        }
    }
    let first = y[0];
    if y.iter().all(|l| *l == first) {
        return Err(Error::InvalidInput(format!("training labels are all `{first}`; need at least 2 classes")));
    }
    Ok(())
}

pub fn train(
    kind: ModelKind,
    x: &[Vec<f64>],
    y: &[IssueLabel],
    feature_names: &[String],
    hyper: &Hyper,
    seed: u64,
) -> Result<TrainedModel> {
    check_training_data(x, y, feature_names)?;
    let standardization = Standardization::fit(x);
    let xs: Vec<Vec<f64>> = x.iter().map(|r| standardization.apply(r)).collect();
    let yi: Vec<usize> = y.iter().map(|l| l.index()).collect();
    let params = match kind {
        ModelKind::LogisticRegression => ModelParams::LogisticRegression(logistic::fit(&xs, &yi, hyper)),
        ModelKind::RandomForest => ModelParams::RandomForest(forest::fit(&xs, &yi, hyper, seed)),
        ModelKind::FeedForwardNet => ModelParams::FeedForwardNet(mlp::fit(&xs, &yi, hyper, seed)),
    };
    Ok(TrainedModel {
        schema_version: MODEL_SCHEMA_VERSION,
        kind,
        hyper: hyper.clone(),
        feature_names: feature_names.to_vec(),
        label_order: IssueLabel::ALL.to_vec(),
        standardization,
        params,
    })
}

impl TrainedModel {
    /// Probabilities in `label_order` for a raw (unstandardized) row.
    pub fn predict_proba_values(&self, row: &[f64]) -> Result<[f64; N_LABELS]> {
        if row.len() != self.feature_names.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} features, got {}",
                self.feature_names.len(),
                row.len()
            )));
        }
        let z = self.standardization.apply(row);
        Ok(match &self.params {
            ModelParams::LogisticRegression(p) => p.predict_proba(&z),
            ModelParams::RandomForest(f) => f.predict_proba(&z),
            ModelParams::FeedForwardNet(p) => p.predict_proba(&z),
        })
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<[f64; N_LABELS]> {
        if x.names != self.feature_names {
            let first_diff = x
                .names
                .iter()
                .zip(&self.feature_names)
                .position(|(a, b)| a != b)
                .unwrap_or(x.names.len().min(self.feature_names.len()));
            return Err(Error::InvalidInput(format!(
                "feature names differ from training at position {first_diff} ({} vs {} features)",
                x.names.len(),
                self.feature_names.len()
            )));
        }
        self.predict_proba_values(&x.values)
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<IssueLabel> {
        Ok(self.label_order[argmax(&self.predict_proba(x)?)])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        check_schema_version(&v, MODEL_SCHEMA_VERSION)?;
        Ok(serde_json::from_value(v)?)
    }
}

/// Rejects JSON artifacts whose `schema_version` is not `expected`.
pub fn check_schema_version(v: &serde_json::Value, expected: u32) -> Result<()> {
    match v.get("schema_version").and_then(|s| s.as_u64()) {
        Some(found) if found == expected as u64 => Ok(()),
        Some(found) => Err(Error::Format(format!("schema_version {found} unsupported, expected {expected}"))),
        None => Err(Error::Format("missing schema_version".into())),
    }
}

/// Index of the maximum; the earliest index wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("video:f{i}")).collect()
    }

    #[test]
    fn label_parsing() {
        assert_eq!("non-informative".parse::<IssueLabel>().unwrap(), IssueLabel::NonInformative);
        assert_eq!("Performance".parse::<IssueLabel>().unwrap(), IssueLabel::Performance);
        assert!("crash".parse::<IssueLabel>().is_err());
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![IssueLabel::Logic; 2];
        let err = train(ModelKind::LogisticRegression, &x, &y, &names(1), &Hyper::default(), 0).unwrap_err();
        assert!(err.to_string().contains("at least 2 classes"));
    }

    #[test]
    fn nan_rejected() {
        let x = vec![vec![0.0], vec![f64::NAN]];
        let y = vec![IssueLabel::Logic, IssueLabel::Balance];
        assert!(train(ModelKind::RandomForest, &x, &y, &names(1), &Hyper::default(), 0).is_err());
    }

    #[test]
    fn name_mismatch_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![IssueLabel::Logic, IssueLabel::Balance];
        let m = train(ModelKind::LogisticRegression, &x, &y, &names(1), &Hyper::default(), 0).unwrap();
        let fv = FeatureVector { segment_id: "s".into(), names: vec!["video:other".into()], values: vec![0.0] };
        assert!(m.predict_proba(&fv).is_err());
        assert!(m.predict_proba_values(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]];
        let y = vec![IssueLabel::Logic, IssueLabel::Balance, IssueLabel::Logic];
        for kind in ModelKind::ALL {
            let hyper = Hyper { trees: 3, hidden: 4, epochs: 2, ..Default::default() };
            let m = train(kind, &x, &y, &names(2), &hyper, 9).unwrap();
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back, m);
        }
        let m = train(ModelKind::LogisticRegression, &x, &y, &names(2), &Hyper::default(), 9).unwrap();
        let bumped = m.to_json().unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        assert!(matches!(TrainedModel::from_json(&bumped).unwrap_err(), Error::Format(_)));
    }

    #[test]
    fn argmax_ties_take_first() {
        assert_eq!(argmax(&[0.2; 5]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.3, 0.2, 0.1]), 1);
    }
}
