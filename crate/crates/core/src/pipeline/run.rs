//! Stage implementations and the full run.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::hierarchy::{CategoryNode, ContextNode, IssueCluster, IssueHierarchy, SegmentRef, Summary};
use super::manifest::{label_for_segment, parse_label_spans, LabelSpan, Manifest, VideoEntry};
use super::split::{split_dataset, stratified_folds};
use crate::clustering::{cluster_issues, group_by_context, ClusterAssignment, ContextItem, IssueItem};
use crate::features::{
    fit_vocabulary, segment_text, smote_oversample, text_features, EmbeddingTable, FeatureGroup, FeatureVector,
    Featurizer, LabeledRow,
};
use crate::frames::{load_track, VideoTrack};
use crate::models::metrics::evaluate_probabilities;
use crate::models::{check_schema_version, train, IssueLabel, ModelKind, TrainedModel, N_LABELS};
use crate::segmentation::{segment_video, HistogramShotDetector, Segment};
use crate::subtitle::{load_subtitles, Transcript};
use crate::{Error, Result};

pub const CLASSIFIER_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Everything known about one video after ingestion and segmentation.
#[derive(Debug, Clone)]
pub struct VideoData {
    pub entry: VideoEntry,
    pub transcript: Transcript,
    pub track: VideoTrack,
    pub segments: Vec<Segment>,
    pub label_spans: Option<Vec<LabelSpan>>,
}

/// Runs `f` on a pool of `workers` threads (0 = one per core).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Maps `f` over items in parallel, keeping input order and reporting the
/// first failure in that order.
fn ordered<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Result<U> + Sync) -> Result<Vec<U>> {
    items.par_iter().map(&f).collect::<Vec<_>>().into_iter().collect()
}

fn ingest_one(entry: &VideoEntry, cfg: &RunConfig) -> Result<(Transcript, VideoTrack, Option<Vec<LabelSpan>>)> {
    let transcript = load_subtitles(&entry.subtitles)?.with_video_id(&entry.video_id);
    let track = load_track(&entry.frames, &entry.video_id, cfg.bins, entry.duration_ms)?;
    let labels = match &entry.labels {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let spans: Vec<LabelSpan> =
                parse_label_spans(&text)?.into_iter().filter(|s| s.video_id == entry.video_id).collect();
            Some(spans)
        }
        None => None,
    };
    Ok((transcript, track, labels))
}

/// Stage timings collected while preparing videos.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

fn timed<T>(timings: &mut Vec<StageTiming>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    timings.push(StageTiming { stage: stage.into(), millis: start.elapsed().as_secs_f64() * 1000.0 });
    Ok(out)
}

fn prepare_timed(manifest: &Manifest, cfg: &RunConfig, timings: &mut Vec<StageTiming>) -> Result<Vec<VideoData>> {
    manifest.check_paths()?;
    let ingested = timed(timings, "ingest", || {
        ordered(&manifest.videos, |e| ingest_one(e, cfg).map_err(|err| err.in_stage("ingest", &e.video_id)))
    })?;
    let detector = HistogramShotDetector::from(&cfg.segmenter);
    let segmented = timed(timings, "segment", || {
        let pairs: Vec<_> = manifest.videos.iter().zip(&ingested).collect();
        ordered(&pairs, |(e, (t, track, _))| {
            segment_video(track, t, &cfg.segmenter, &detector).map_err(|err| err.in_stage("segment", &e.video_id))
        })
    })?;
    Ok(manifest
        .videos
        .iter()
        .zip(ingested)
        .zip(segmented)
        .map(|((entry, (transcript, track, label_spans)), segments)| VideoData {
            entry: entry.clone(),
            transcript,
            track,
            segments,
            label_spans,
        })
        .collect())
}

/// Ingests and segments every video of the manifest.
pub fn prepare_videos(manifest: &Manifest, cfg: &RunConfig) -> Result<Vec<VideoData>> {
    prepare_timed(manifest, cfg, &mut Vec::new())
}

/// A fitted feature extractor with the model trained on its output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub schema_version: u32,
    pub featurizer: Featurizer,
    pub model: TrainedModel,
}

impl Classifier {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        check_schema_version(&v, CLASSIFIER_SCHEMA_VERSION)?;
        let c: Classifier = serde_json::from_value(v)?;
        if c.model.schema_version != crate::models::MODEL_SCHEMA_VERSION {
            return Err(Error::Format(format!("model schema_version {} unsupported", c.model.schema_version)));
        }
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Classifier::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn predict(&self, segment: &Segment, video: &VideoData) -> Result<(IssueLabel, [f64; N_LABELS])> {
        let x = self.featurizer.featurize(segment, &video.transcript, &video.track);
        let p = self.model.predict_proba(&x)?;
        Ok((self.model.label_order[crate::models::argmax(&p)], p))
    }
}

/// Position of a segment: (video index, segment index).
pub type SegmentKey = (usize, usize);

/// Labeled segments of all videos that carry label files.
pub fn labeled_segments(videos: &[VideoData]) -> Vec<(SegmentKey, IssueLabel)> {
    videos
        .iter()
        .enumerate()
        .filter_map(|(vi, v)| v.label_spans.as_ref().map(|spans| (vi, v, spans)))
        .flat_map(|(vi, v, spans)| {
            v.segments.iter().enumerate().map(move |(si, s)| ((vi, si), label_for_segment(s, spans)))
        })
        .collect()
}

fn load_embeddings(cfg: &RunConfig) -> Result<Option<EmbeddingTable>> {
    match &cfg.embeddings {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Ok(Some(EmbeddingTable::parse(&text)?))
        }
        None => Ok(None),
    }
}

fn featurize(featurizer: &Featurizer, videos: &[VideoData], keys: &[SegmentKey]) -> Vec<FeatureVector> {
    keys.par_iter()
        .map(|&(vi, si)| {
            let v = &videos[vi];
            featurizer.featurize(&v.segments[si], &v.transcript, &v.track)
        })
        .collect()
}

fn fit_on(
    videos: &[VideoData],
    rows: &[(SegmentKey, IssueLabel)],
    groups: &[FeatureGroup],
    kind: ModelKind,
    embeddings: Option<EmbeddingTable>,
    cfg: &RunConfig,
) -> Result<Classifier> {
    let texts: Vec<String> =
        rows.iter().map(|&((vi, si), _)| segment_text(&videos[vi].segments[si], &videos[vi].transcript)).collect();
    let text_refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let featurizer = Featurizer::fit(groups, &text_refs, &cfg.vocabulary_config(), embeddings)?;
    let keys: Vec<SegmentKey> = rows.iter().map(|r| r.0).collect();
    let vectors = featurize(&featurizer, videos, &keys);
    let names = vectors.first().map(|v| v.names.clone()).unwrap_or_default();
    let mut data: Vec<LabeledRow<IssueLabel>> = vectors
        .into_iter()
        .zip(rows)
        .map(|(v, &(_, label))| LabeledRow { id: v.segment_id, values: v.values, label })
        .collect();
    if cfg.smote {
        match smote_oversample(&data, cfg.smote_k, cfg.seed) {
            Ok(out) => data = out.rows,
            Err(e) => log::warn!("skipping SMOTE: {e}"),
        }
    }
    let x: Vec<Vec<f64>> = data.iter().map(|r| r.values.clone()).collect();
    let y: Vec<IssueLabel> = data.iter().map(|r| r.label).collect();
    let model = train(kind, &x, &y, &names, &cfg.hyper, cfg.seed)?;
    Ok(Classifier { schema_version: CLASSIFIER_SCHEMA_VERSION, featurizer, model })
}

/// Trains the configured model on every labeled segment.
pub fn train_classifier(videos: &[VideoData], cfg: &RunConfig) -> Result<Classifier> {
    let rows = labeled_segments(videos);
    if rows.is_empty() {
        return Err(Error::InvalidInput("no labeled segments: give a --model or label files in the manifest".into()));
    }
    let groups = effective_groups(&cfg.feature_groups, cfg.embeddings.is_some());
    fit_on(videos, &rows, &groups, cfg.model_kind, load_embeddings(cfg)?, cfg)
}

fn effective_groups(groups: &[FeatureGroup], have_embeddings: bool) -> Vec<FeatureGroup> {
    groups.iter().copied().filter(|g| *g != FeatureGroup::Embedding || have_embeddings).collect()
}

/// A segment's predicted label and class probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPrediction {
    pub segment: SegmentRef,
    pub label: IssueLabel,
    pub probabilities: BTreeMap<String, f64>,
}

/// Classifies every segment; output is in manifest then segment order.
pub fn classify_videos(classifier: &Classifier, videos: &[VideoData]) -> Result<Vec<SegmentPrediction>> {
    let per_video = ordered(videos, |v| {
        v.segments
            .iter()
            .map(|s| {
                let (label, p) = classifier.predict(s, v)?;
                let probabilities =
                    classifier.model.label_order.iter().zip(p).map(|(l, q)| (l.as_str().to_string(), q)).collect();
                Ok(SegmentPrediction { segment: s.into(), label, probabilities })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("classify", &v.entry.video_id))
    })?;
    Ok(per_video.into_iter().flatten().collect())
}

/// Score of one model/feature-set configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationScore {
    pub model: ModelKind,
    pub features: String,
    pub groups: Vec<FeatureGroup>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub schema_version: u32,
    pub evaluation_size: usize,
    pub test_size: usize,
    pub folds: usize,
    pub results: Vec<ConfigurationScore>,
}

/// The three feature sets compared: text only, video and speech, and all.
pub fn feature_sets(have_embeddings: bool) -> Vec<(&'static str, Vec<FeatureGroup>)> {
    let mut text = vec![FeatureGroup::Text];
    let mut all = vec![FeatureGroup::Text, FeatureGroup::Video, FeatureGroup::Speech];
    if have_embeddings {
        text.push(FeatureGroup::Embedding);
        all.push(FeatureGroup::Embedding);
    }
    vec![("text", text), ("video", vec![FeatureGroup::Video, FeatureGroup::Speech]), ("all", all)]
}

/// Compares the nine model/feature-set configurations. The evaluation
/// share of the split is held back for tuning; the rest is scored by
/// stratified cross-validation, pooling out-of-fold predictions.
pub fn compare_models(videos: &[VideoData], cfg: &RunConfig) -> Result<ModelComparison> {
    let rows = labeled_segments(videos);
    let labels: Vec<IssueLabel> = rows.iter().map(|r| r.1).collect();
    let split = split_dataset(&labels, cfg.eval_fraction, cfg.test_fraction, cfg.seed)?;
    let test_rows: Vec<(SegmentKey, IssueLabel)> = split.test.iter().map(|&i| rows[i]).collect();
    if test_rows.len() < cfg.folds {
        return Err(Error::InvalidInput(format!(
            "{} labeled segments cannot fill {} folds",
            test_rows.len(),
            cfg.folds
        )));
    }
    let test_labels: Vec<IssueLabel> = test_rows.iter().map(|r| r.1).collect();
    let folds = stratified_folds(&test_labels, cfg.folds, cfg.seed);
    let embeddings = load_embeddings(cfg)?;
    let mut results = Vec::new();
    for kind in ModelKind::ALL {
        for (name, groups) in feature_sets(embeddings.is_some()) {
            let mut probs = vec![[0.0; N_LABELS]; test_rows.len()];
            for k in 0..cfg.folds {
                let train_rows: Vec<_> = (0..test_rows.len()).filter(|&i| folds[i] != k).map(|i| test_rows[i]).collect();
                let held: Vec<usize> = (0..test_rows.len()).filter(|&i| folds[i] == k).collect();
                let clf = fit_on(videos, &train_rows, &groups, kind, embeddings.clone(), cfg)?;
                let keys: Vec<SegmentKey> = held.iter().map(|&i| test_rows[i].0).collect();
                for (i, x) in held.iter().zip(featurize(&clf.featurizer, videos, &keys)) {
                    probs[*i] = clf.model.predict_proba(&x)?;
                }
            }
            let eval = evaluate_probabilities(&probs, &test_labels)?;
            results.push(ConfigurationScore {
                model: kind,
                features: name.to_string(),
                groups: groups.clone(),
                accuracy: eval.accuracy,
                macro_precision: eval.macro_precision(),
                macro_recall: eval.macro_recall(),
                macro_auc: eval.macro_auc(),
            });
        }
    }
    Ok(ModelComparison {
        schema_version: REPORT_SCHEMA_VERSION,
        evaluation_size: split.evaluation.len(),
        test_size: split.test.len(),
        folds: cfg.folds,
        results,
    })
}

/// Counts and timings of one run. Timings vary between runs; the
/// hierarchy does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub seed: u64,
    pub n_videos: usize,
    pub segments_total: usize,
    pub informative: usize,
    pub non_informative: usize,
    /// True when every segment was classified non-informative.
    pub all_discarded: bool,
    pub label_counts: BTreeMap<String, usize>,
    pub n_contexts: usize,
    pub n_issue_clusters: usize,
    pub model_kind: ModelKind,
    pub model_trained_in_run: bool,
    pub stage_timings: Vec<StageTiming>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub hierarchy: IssueHierarchy,
    pub report: RunReport,
    pub classifier: Classifier,
    pub predictions: Vec<SegmentPrediction>,
    pub contexts: ClusterAssignment,
}

/// Groups of item ids from an assignment, noise as singletons, ordered by
/// their smallest id.
fn groups_of(a: &ClusterAssignment) -> Vec<(Vec<String>, String)> {
    let mut groups: Vec<(Vec<String>, String)> =
        a.clusters.iter().map(|c| (c.member_segment_ids.clone(), c.medoid.clone())).collect();
    groups.extend(a.noise.iter().map(|n| (vec![n.clone()], n.clone())));
    groups.sort_by(|x, y| x.0[0].cmp(&y.0[0]));
    groups
}

/// Runs every stage. `classifier` is trained from the manifest's label
/// files when not given.
pub fn run_pipeline(manifest: &Manifest, cfg: &RunConfig, classifier: Option<&Classifier>) -> Result<RunOutput> {
    cfg.validate()?;
    with_workers(cfg.workers, || run_inner(manifest, cfg, classifier))?
}

fn run_inner(manifest: &Manifest, cfg: &RunConfig, classifier: Option<&Classifier>) -> Result<RunOutput> {
    let mut timings = Vec::new();
    let videos = prepare_timed(manifest, cfg, &mut timings)?;
    let trained_in_run = classifier.is_none();
    let classifier = match classifier {
        Some(c) => c.clone(),
        None => timed(&mut timings, "train", || train_classifier(&videos, cfg))?,
    };
    let predictions = timed(&mut timings, "classify", || classify_videos(&classifier, &videos))?;

    let mut lookup: BTreeMap<&str, (SegmentKey, IssueLabel, &SegmentRef)> = BTreeMap::new();
    let mut keys = Vec::new();
    for (vi, v) in videos.iter().enumerate() {
        for si in 0..v.segments.len() {
            keys.push((vi, si));
        }
    }
    for (key, p) in keys.iter().zip(&predictions) {
        lookup.insert(p.segment.segment_id.as_str(), (*key, p.label, &p.segment));
    }
    let informative: Vec<(SegmentKey, &SegmentPrediction)> =
        keys.iter().copied().zip(&predictions).filter(|(_, p)| p.label.is_informative()).collect();

    let context_algo = cfg.context.to_algorithm()?;
    let contexts = timed(&mut timings, "group", || {
        let items = informative
            .iter()
            .map(|&((vi, si), _)| ContextItem::from_segment(&videos[vi].segments[si], &videos[vi].track))
            .collect::<Result<Vec<_>>>()?;
        group_by_context(&items, &context_algo)
    })?;

    let issue_algo = cfg.issues.to_algorithm()?;
    let hierarchy = timed(&mut timings, "cluster", || {
        let texts: Vec<String> = informative
            .iter()
            .map(|&((vi, si), _)| segment_text(&videos[vi].segments[si], &videos[vi].transcript))
            .collect();
        let text_refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vocab = if text_refs.is_empty() { None } else { fit_vocabulary(&text_refs, &cfg.vocabulary_config()).ok() };
        let mut nodes = Vec::new();
        for (ci, (members, _)) in groups_of(&contexts).into_iter().enumerate() {
            let context_id = format!("ctx-{ci:03}");
            let mut categories = Vec::new();
            for label in IssueLabel::ALL.into_iter().filter(|l| l.is_informative()) {
                let in_cat: Vec<&str> =
                    members.iter().map(String::as_str).filter(|m| lookup[m].1 == label).collect();
                if in_cat.is_empty() {
                    continue;
                }
                let items = in_cat
                    .iter()
                    .map(|m| {
                        let (vi, si) = lookup[m].0;
                        let (v, s) = (&videos[vi], &videos[vi].segments[si]);
                        let text = match &vocab {
                            Some(vocab) => text_features(m, &segment_text(s, &v.transcript), vocab).values,
                            None => Vec::new(),
                        };
                        Ok(IssueItem { context: ContextItem::from_segment(s, &v.track)?, text })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let assignment = cluster_issues(&items, cfg.alpha, &issue_algo)?;
                let clusters: Vec<IssueCluster> = groups_of(&assignment)
                    .into_iter()
                    .enumerate()
                    .map(|(k, (ids, medoid))| {
                        let mut refs: Vec<SegmentRef> = ids.iter().map(|id| lookup[id.as_str()].2.clone()).collect();
                        refs.sort_by_key(|r| (r.segment_id != medoid, r.segment_id.clone()));
                        IssueCluster { cluster_id: format!("{context_id}/{}/{k:02}", label.as_str()), medoid, members: refs }
                    })
                    .collect();
                let summary = Summary::of(in_cat.iter().map(|m| (lookup[m].2, label)));
                categories.push(CategoryNode { label, summary, clusters });
            }
            let summary = Summary::of(members.iter().map(|m| (lookup[m.as_str()].2, lookup[m.as_str()].1)));
            nodes.push(ContextNode { context_id, summary, categories });
        }
        Ok(IssueHierarchy { schema_version: super::hierarchy::HIERARCHY_SCHEMA_VERSION, contexts: nodes })
    })?;

    if hierarchy.n_members() != informative.len() {
        return Err(Error::Invariant(format!(
            "hierarchy holds {} segments but {} are informative",
            hierarchy.n_members(),
            informative.len()
        )));
    }
    let mut label_counts = BTreeMap::new();
    for p in &predictions {
        *label_counts.entry(p.label.as_str().to_string()).or_insert(0) += 1;
    }
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: cfg.seed,
        n_videos: videos.len(),
        segments_total: predictions.len(),
        informative: informative.len(),
        non_informative: predictions.len() - informative.len(),
        all_discarded: !predictions.is_empty() && informative.is_empty(),
        label_counts,
        n_contexts: hierarchy.contexts.len(),
        n_issue_clusters: hierarchy.contexts.iter().flat_map(|c| &c.categories).map(|k| k.clusters.len()).sum(),
        model_kind: classifier.model.kind,
        model_trained_in_run: trained_in_run,
        stage_timings: timings,
    };
    if report.all_discarded {
        log::warn!("every segment was classified non-informative; the hierarchy is empty");
    }
    Ok(RunOutput { hierarchy, report, classifier, predictions, contexts })
}
