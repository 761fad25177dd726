//! End-to-end orchestration: ingest → segment → classify → group by
//! context → cluster issues → report.
//!
//! Per-video stages run on a worker pool and are merged in manifest order,
//! so the thread count never changes results.

pub mod config;
pub mod hierarchy;
pub mod manifest;
pub mod run;
pub mod split;

use std::path::Path;

pub use config::{ClusterSettings, RunConfig};
pub use hierarchy::{
    canonical_json, export_report, render_html, write_report, CategoryNode, ContextNode, IssueCluster, IssueHierarchy,
    ReportFormat, SegmentRef, Summary,
};
pub use manifest::{label_for_segment, parse_label_spans, LabelSpan, Manifest, VideoEntry};
pub use run::{
    classify_videos, compare_models, prepare_videos, run_pipeline, train_classifier, Classifier, ModelComparison,
    RunOutput, RunReport, SegmentPrediction, VideoData,
};
pub use split::{split_dataset, stratified_folds, Split};

use crate::{Error, Result};

/// Writes `text` to `path`, creating missing parent directories.
pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
