//! Run configuration in a flat `section.key = value` text format.
//!
//! Blank lines and `#` comments are ignored, unknown keys are errors, and
//! `run.seed` must be present. Any key can be overridden from the
//! environment as `GELID_<SECTION>_<KEY>` (upper case, dots as underscores).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterAlgorithm;
use crate::features::{FeatureGroup, VocabularyConfig};
use crate::models::{Hyper, ModelKind};
use crate::segmentation::SegmenterConfig;
use crate::{Error, Result};

/// Clustering algorithm name plus every algorithm's parameters; only the
/// chosen algorithm's fields are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSettings {
    pub algorithm: String,
    pub eps: f64,
    pub min_pts: usize,
    pub eps_max: f64,
    pub eps_cut: f64,
    pub bandwidth: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        let (ClusterAlgorithm::Dbscan { eps, min_pts }, ClusterAlgorithm::Optics { eps_max, eps_cut, .. }) =
            (ClusterAlgorithm::DEFAULT_DBSCAN, ClusterAlgorithm::DEFAULT_OPTICS)
        else {
            unreachable!()
        };
        let ClusterAlgorithm::MeanShift { bandwidth, tol, max_iter } = ClusterAlgorithm::DEFAULT_MEAN_SHIFT else {
            unreachable!()
        };
        ClusterSettings { algorithm: "dbscan".into(), eps, min_pts, eps_max, eps_cut, bandwidth, tol, max_iter }
    }
}

impl ClusterSettings {
    pub fn to_algorithm(&self) -> Result<ClusterAlgorithm> {
        Ok(match ClusterAlgorithm::default_for(&self.algorithm)? {
            ClusterAlgorithm::Dbscan { .. } => ClusterAlgorithm::Dbscan { eps: self.eps, min_pts: self.min_pts },
            ClusterAlgorithm::Optics { .. } => {
                ClusterAlgorithm::Optics { min_pts: self.min_pts, eps_max: self.eps_max, eps_cut: self.eps_cut }
            }
            ClusterAlgorithm::MeanShift { .. } => {
                ClusterAlgorithm::MeanShift { bandwidth: self.bandwidth, tol: self.tol, max_iter: self.max_iter }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for per-video stages; 0 uses all cores.
    pub workers: usize,
    pub eval_fraction: f64,
    pub test_fraction: f64,
    /// Cross-validation folds used when comparing model configurations.
    pub folds: usize,
    pub bins: usize,
    pub segmenter: SegmenterConfig,
    pub feature_groups: Vec<FeatureGroup>,
    pub ngram_max: usize,
    pub min_df: u32,
    /// Token vector file for the embedding group, relative to the config file.
    pub embeddings: Option<PathBuf>,
    pub smote: bool,
    pub smote_k: usize,
    pub model_kind: ModelKind,
    pub hyper: Hyper,
    pub context: ClusterSettings,
    pub issues: ClusterSettings,
    /// Text weight in the issue distance.
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            workers: 0,
            eval_fraction: 0.1,
            test_fraction: 0.9,
            folds: 5,
            bins: crate::frames::DEFAULT_BINS,
            segmenter: SegmenterConfig::default(),
            feature_groups: vec![FeatureGroup::Text, FeatureGroup::Video, FeatureGroup::Speech],
            ngram_max: 1,
            min_df: 1,
            embeddings: None,
            smote: true,
            smote_k: 5,
            model_kind: ModelKind::LogisticRegression,
            hyper: Hyper::default(),
            context: ClusterSettings::default(),
            issues: ClusterSettings::default(),
            alpha: 0.5,
        }
    }
}

/// Every recognised key, in serialization order.
pub const KEYS: &[&str] = &[
    "run.seed",
    "run.workers",
    "split.eval_fraction",
    "split.test_fraction",
    "split.folds",
    "frames.bins",
    "segmenter.k_seconds",
    "segmenter.alpha",
    "segmenter.window",
    "segmenter.min_shot_ms",
    "segmenter.min_segment_ms",
    "segmenter.silence_ms",
    "segmenter.gap_ms",
    "segmenter.max_keyframes",
    "features.groups",
    "features.ngram_max",
    "features.min_df",
    "features.embeddings",
    "features.smote",
    "features.smote_k",
    "model.kind",
    "model.lambda",
    "model.iterations",
    "model.learning_rate",
    "model.trees",
    "model.min_leaf",
    "model.max_depth",
    "model.bootstrap",
    "model.hidden",
    "model.epochs",
    "model.batch_size",
    "model.nn_learning_rate",
    "context.algorithm",
    "context.eps",
    "context.min_pts",
    "context.eps_max",
    "context.eps_cut",
    "context.bandwidth",
    "context.tol",
    "context.max_iter",
    "issues.algorithm",
    "issues.eps",
    "issues.min_pts",
    "issues.eps_max",
    "issues.eps_cut",
    "issues.bandwidth",
    "issues.tol",
    "issues.max_iter",
    "issues.alpha",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got `{value}`"))),
    }
}

fn cluster_set(c: &mut ClusterSettings, field: &str, key: &str, value: &str) -> Result<()> {
    match field {
        "algorithm" => {
            ClusterAlgorithm::default_for(value)?;
            c.algorithm = value.to_string();
        }
        "eps" => c.eps = num(key, value)?,
        "min_pts" => c.min_pts = num(key, value)?,
        "eps_max" => c.eps_max = num(key, value)?,
        "eps_cut" => c.eps_cut = num(key, value)?,
        "bandwidth" => c.bandwidth = num(key, value)?,
        "tol" => c.tol = num(key, value)?,
        "max_iter" => c.max_iter = num(key, value)?,
        _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
    }
    Ok(())
}

fn cluster_get(c: &ClusterSettings, field: &str) -> String {
    match field {
        "algorithm" => c.algorithm.clone(),
        "eps" => c.eps.to_string(),
        "min_pts" => c.min_pts.to_string(),
        "eps_max" => c.eps_max.to_string(),
        "eps_cut" => c.eps_cut.to_string(),
        "bandwidth" => c.bandwidth.to_string(),
        "tol" => c.tol.to_string(),
        "max_iter" => c.max_iter.to_string(),
        _ => unreachable!("unknown cluster field {field}"),
    }
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let s = &mut self.segmenter;
        let h = &mut self.hyper;
        match key {
            "run.seed" => self.seed = num(key, value)?,
            "run.workers" => self.workers = num(key, value)?,
            "split.eval_fraction" => self.eval_fraction = num(key, value)?,
            "split.test_fraction" => self.test_fraction = num(key, value)?,
            "split.folds" => self.folds = num(key, value)?,
            "frames.bins" => self.bins = num(key, value)?,
            "segmenter.k_seconds" => s.k_seconds = num(key, value)?,
            "segmenter.alpha" => s.alpha = num(key, value)?,
            "segmenter.window" => s.window = num(key, value)?,
            "segmenter.min_shot_ms" => s.min_shot_ms = num(key, value)?,
            "segmenter.min_segment_ms" => s.min_segment_ms = num(key, value)?,
            "segmenter.silence_ms" => s.silence_ms = num(key, value)?,
            "segmenter.gap_ms" => s.gap_ms = num(key, value)?,
            "segmenter.max_keyframes" => s.max_keyframes = num(key, value)?,
            "features.groups" => {
                self.feature_groups = value
                    .split(',')
                    .map(str::trim)
                    .filter(|g| !g.is_empty())
                    .map(|g| g.parse::<FeatureGroup>().map_err(|e| Error::Config(format!("{key}: {e}"))))
                    .collect::<Result<_>>()?
            }
            "features.ngram_max" => self.ngram_max = num(key, value)?,
            "features.min_df" => self.min_df = num(key, value)?,
            "features.embeddings" => {
                self.embeddings = if value.is_empty() || value == "none" { None } else { Some(value.into()) }
            }
            "features.smote" => self.smote = flag(key, value)?,
            "features.smote_k" => self.smote_k = num(key, value)?,
            "model.kind" => self.model_kind = value.parse()?,
            "model.lambda" => h.lambda = num(key, value)?,
            "model.iterations" => h.iterations = num(key, value)?,
            "model.learning_rate" => h.learning_rate = num(key, value)?,
            "model.trees" => h.trees = num(key, value)?,
            "model.min_leaf" => h.min_leaf = num(key, value)?,
            "model.max_depth" => h.max_depth = if value == "none" { None } else { Some(num(key, value)?) },
            "model.bootstrap" => h.bootstrap = flag(key, value)?,
            "model.hidden" => h.hidden = num(key, value)?,
            "model.epochs" => h.epochs = num(key, value)?,
            "model.batch_size" => h.batch_size = num(key, value)?,
            "model.nn_learning_rate" => h.nn_learning_rate = num(key, value)?,
            "issues.alpha" => self.alpha = num(key, value)?,
            _ => match key.split_once('.') {
                Some(("context", field)) => cluster_set(&mut self.context, field, key, value)?,
                Some(("issues", field)) => cluster_set(&mut self.issues, field, key, value)?,
                _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
            },
        }
        Ok(())
    }

    /// Textual value of a key, as written by [`RunConfig::to_text`].
    pub fn get(&self, key: &str) -> Result<String> {
        let s = &self.segmenter;
        let h = &self.hyper;
        Ok(match key {
            "run.seed" => self.seed.to_string(),
            "run.workers" => self.workers.to_string(),
            "split.eval_fraction" => self.eval_fraction.to_string(),
            "split.test_fraction" => self.test_fraction.to_string(),
            "split.folds" => self.folds.to_string(),
            "frames.bins" => self.bins.to_string(),
            "segmenter.k_seconds" => s.k_seconds.to_string(),
            "segmenter.alpha" => s.alpha.to_string(),
            "segmenter.window" => s.window.to_string(),
            "segmenter.min_shot_ms" => s.min_shot_ms.to_string(),
            "segmenter.min_segment_ms" => s.min_segment_ms.to_string(),
            "segmenter.silence_ms" => s.silence_ms.to_string(),
            "segmenter.gap_ms" => s.gap_ms.to_string(),
            "segmenter.max_keyframes" => s.max_keyframes.to_string(),
            "features.groups" => self.feature_groups.iter().map(|g| g.as_str()).collect::<Vec<_>>().join(","),
            "features.ngram_max" => self.ngram_max.to_string(),
            "features.min_df" => self.min_df.to_string(),
            "features.embeddings" => self.embeddings.as_ref().map_or("none".into(), |p| p.display().to_string()),
            "features.smote" => self.smote.to_string(),
            "features.smote_k" => self.smote_k.to_string(),
            "model.kind" => self.model_kind.as_str().to_string(),
            "model.lambda" => h.lambda.to_string(),
            "model.iterations" => h.iterations.to_string(),
            "model.learning_rate" => h.learning_rate.to_string(),
            "model.trees" => h.trees.to_string(),
            "model.min_leaf" => h.min_leaf.to_string(),
            "model.max_depth" => h.max_depth.map_or("none".into(), |d| d.to_string()),
            "model.bootstrap" => h.bootstrap.to_string(),
            "model.hidden" => h.hidden.to_string(),
            "model.epochs" => h.epochs.to_string(),
            "model.batch_size" => h.batch_size.to_string(),
            "model.nn_learning_rate" => h.nn_learning_rate.to_string(),
            "issues.alpha" => self.alpha.to_string(),
            _ => match key.split_once('.') {
                Some(("context", f)) if KEYS.contains(&key) => cluster_get(&self.context, f),
                Some(("issues", f)) if KEYS.contains(&key) => cluster_get(&self.issues, f),
                _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
            },
        })
    }

    /// Parses the text format; every key not given keeps its default.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen_seed = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `section.key = value`", i + 1)))?;
            let key = key.trim();
            cfg.set(key, value).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", i + 1)),
                other => other,
            })?;
            seen_seed |= key == "run.seed";
        }
        if !seen_seed {
            return Err(Error::Config("run.seed is required".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::parse(&text)?;
        if let (Some(emb), Some(dir)) = (&cfg.embeddings, path.parent()) {
            if emb.is_relative() {
                cfg.embeddings = Some(dir.join(emb));
            }
        }
        Ok(cfg)
    }

    /// Every key with its current value, one per line.
    pub fn to_text(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).expect("listed keys are known"))).collect()
    }

    /// Environment variable name overriding `key`.
    pub fn env_name(key: &str) -> String {
        format!("GELID_{}", key.replace('.', "_").to_uppercase())
    }

    /// Applies `GELID_*` overrides; variables that match no key are ignored.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        for (name, value) in vars {
            if let Some(key) = KEYS.iter().find(|k| RunConfig::env_name(k) == name) {
                self.set(key, &value).map_err(|e| Error::Config(format!("{name}: {e}")))?;
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.segmenter.validate()?;
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.eval_fraction) || !in_unit(self.test_fraction) {
            return Err(Error::Config("split fractions must lie in [0, 1]".into()));
        }
        if (self.eval_fraction + self.test_fraction - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1 (got {} + {})",
                self.eval_fraction, self.test_fraction
            )));
        }
        if self.folds < 2 {
            return Err(Error::Config("split.folds must be >= 2".into()));
        }
        if self.bins == 0 || 256 % self.bins != 0 {
            return Err(Error::Config(format!("frames.bins must divide 256 (got {})", self.bins)));
        }
        if self.feature_groups.is_empty() {
            return Err(Error::Config("features.groups must name at least one group".into()));
        }
        if !(1..=2).contains(&self.ngram_max) {
            return Err(Error::Config("features.ngram_max must be 1 or 2".into()));
        }
        if !in_unit(self.alpha) {
            return Err(Error::Config("issues.alpha must lie in [0, 1]".into()));
        }
        if self.smote_k == 0 {
            return Err(Error::Config("features.smote_k must be >= 1".into()));
        }
        if self.hyper.iterations == 0 || self.hyper.trees == 0 || self.hyper.hidden == 0 || self.hyper.batch_size == 0 {
            return Err(Error::Config("model iterations, trees, hidden and batch_size must be >= 1".into()));
        }
        self.context.to_algorithm()?;
        self.issues.to_algorithm()?;
        Ok(())
    }

    pub fn vocabulary_config(&self) -> VocabularyConfig {
        VocabularyConfig { ngram_max: self.ngram_max, min_df: self.min_df, ..VocabularyConfig::default() }
    }
}
