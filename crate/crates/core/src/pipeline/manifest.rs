//! Dataset manifests and segment label files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::models::{check_schema_version, IssueLabel};
use crate::segmentation::Segment;
use crate::{Error, Millis, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// One video: subtitles plus either a directory of `<timestamp_ms>.ppm`
/// frames or a descriptor CSV. Relative paths resolve against the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub video_id: String,
    pub subtitles: PathBuf,
    pub frames: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<Millis>,
    /// JSON-lines file of [`LabelSpan`]s used for training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub videos: Vec<VideoEntry>,
}

impl Manifest {
    pub fn new(videos: Vec<VideoEntry>) -> Result<Self> {
        let m = Manifest { schema_version: MANIFEST_SCHEMA_VERSION, videos };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for v in &self.videos {
            if v.video_id.is_empty() || v.video_id.contains('/') {
                return Err(Error::InvalidInput(format!("invalid video id `{}`", v.video_id)));
            }
            if !seen.insert(&v.video_id) {
                return Err(Error::InvalidInput(format!("video id `{}` listed twice", v.video_id)));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        check_schema_version(&value, MANIFEST_SCHEMA_VERSION)?;
        let mut m: Manifest = serde_json::from_value(value)?;
        for v in &mut m.videos {
            v.subtitles = base.join(&v.subtitles);
            v.frames = base.join(&v.frames);
            v.labels = v.labels.as_ref().map(|l| base.join(l));
        }
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Manifest::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Fails on the first referenced path that does not exist.
    pub fn check_paths(&self) -> Result<()> {
        for v in &self.videos {
            let paths = [Some(&v.subtitles), Some(&v.frames), v.labels.as_ref()];
            for p in paths.into_iter().flatten() {
                if !p.exists() {
                    return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound))
                        .in_stage("ingest", &v.video_id));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// A labeled time range of one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpan {
    pub video_id: String,
    pub start_ms: Millis,
    pub end_ms: Millis,
    pub label: IssueLabel,
}

pub fn parse_label_spans(text: &str) -> Result<Vec<LabelSpan>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let span: LabelSpan = serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            if span.end_ms <= span.start_ms {
                return Err(Error::parse(i + 1, "label span must have end_ms > start_ms"));
            }
            Ok(span)
        })
        .collect()
}

/// The label overlapping the segment the longest (ties to the earlier
/// label in label order); segments without any overlap are non-informative.
pub fn label_for_segment(segment: &Segment, spans: &[LabelSpan]) -> IssueLabel {
    let mut overlap = [0u64; crate::models::N_LABELS];
    for s in spans.iter().filter(|s| s.video_id == segment.video_id) {
        let lo = s.start_ms.max(segment.start_ms);
        let hi = s.end_ms.min(segment.end_ms);
        if hi > lo {
            overlap[s.label.index()] += hi - lo;
        }
    }
    let best = (0..overlap.len()).fold(0, |b, i| if overlap[i] > overlap[b] { i } else { b });
    if overlap[best] == 0 {
        IssueLabel::NonInformative
    } else {
        IssueLabel::ALL[best]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(start: Millis, end: Millis) -> Segment {
        Segment {
            segment_id: Segment::make_id("v", start),
            video_id: "v".into(),
            start_ms: start,
            end_ms: end,
            cue_indices: vec![],
            keyframe_timestamps: vec![],
        }
    }

    #[test]
    fn manifest_resolution_and_validation() {
        let text = r#"{"schema_version":1,"videos":[{"video_id":"a","subtitles":"a.srt","frames":"a.csv"}]}"#;
        let m = Manifest::parse(text, Path::new("/data")).unwrap();
        assert_eq!(m.videos[0].subtitles, PathBuf::from("/data/a.srt"));
        assert!(m.check_paths().is_err());
        let dup = r#"{"schema_version":1,"videos":[{"video_id":"a","subtitles":"a","frames":"b"},{"video_id":"a","subtitles":"a","frames":"b"}]}"#;
        assert!(Manifest::parse(dup, Path::new(".")).is_err());
        let bad = r#"{"schema_version":2,"videos":[]}"#;
        assert!(matches!(Manifest::parse(bad, Path::new(".")), Err(Error::Format(_))));
    }

    #[test]
    fn labels_by_overlap() {
        let spans = parse_label_spans(
            "{\"video_id\":\"v\",\"start_ms\":0,\"end_ms\":4000,\"label\":\"logic\"}\n\
             {\"video_id\":\"v\",\"start_ms\":4000,\"end_ms\":10000,\"label\":\"balance\"}\n",
        )
        .unwrap();
        assert_eq!(label_for_segment(&seg(0, 5000), &spans), IssueLabel::Logic);
        assert_eq!(label_for_segment(&seg(3000, 9000), &spans), IssueLabel::Balance);
        assert_eq!(label_for_segment(&seg(10000, 12000), &spans), IssueLabel::NonInformative);
        assert!(parse_label_spans("{\"video_id\":\"v\",\"start_ms\":5,\"end_ms\":5,\"label\":\"logic\"}").is_err());
    }
}
