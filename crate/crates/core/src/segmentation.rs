//! Cutting a video into segments.
//!
//! Shot transitions are found on the frame histograms, shifted forward by the
//! streamer's reaction time `k`, and then snapped to the end of the sentence
//! being spoken at the shifted instant. When nobody is speaking the cut falls
//! exactly on the shifted instant.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::frames::{l1_distance, VideoTrack};
use crate::subtitle::{sentence_spans, SentenceSpan, Transcript};
use crate::{Error, Millis, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotTransition {
    pub timestamp_ms: Millis,
    /// Histogram dissimilarity that triggered the detection.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapRule {
    SentenceEnd,
    SilencePassthrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutPoint {
    pub cut_ms: Millis,
    pub source_shot_ms: Millis,
    pub shifted_ms: Millis,
    pub snap_rule: SnapRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: String,
    pub video_id: String,
    pub start_ms: Millis,
    pub end_ms: Millis,
    pub cue_indices: Vec<u32>,
    pub keyframe_timestamps: Vec<Millis>,
}

impl Segment {
    pub fn duration_ms(&self) -> Millis {
        self.end_ms - self.start_ms
    }

    pub fn make_id(video_id: &str, start_ms: Millis) -> String {
        format!("{video_id}/{start_ms:010}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    /// Reaction shift in seconds.
    pub k_seconds: u32,
    /// Threshold multiplier on the windowed standard deviation.
    pub alpha: f64,
    /// Number of preceding frame distances used for the adaptive threshold.
    pub window: usize,
    pub min_shot_ms: Millis,
    pub min_segment_ms: Millis,
    /// How long after the shifted instant a starting sentence still counts.
    pub silence_ms: Millis,
    /// Silence that ends an unpunctuated sentence.
    pub gap_ms: Millis,
    pub max_keyframes: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            k_seconds: 5,
            alpha: 3.0,
            window: 24,
            min_shot_ms: 2000,
            min_segment_ms: 3000,
            silence_ms: 3000,
            gap_ms: 1500,
            max_keyframes: 10,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("segmenter.alpha must be > 0, got {}", self.alpha)));
        }
        if self.window == 0 {
            return Err(Error::Config("segmenter.window must be >= 1".into()));
        }
        if self.max_keyframes == 0 {
            return Err(Error::Config("segmenter.max_keyframes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Pluggable shot-boundary detection.
pub trait ShotDetector {
    fn detect(&self, track: &VideoTrack) -> Vec<ShotTransition>;
}

/// Adaptive-threshold detector on consecutive histogram L1 distances.
///
/// Frame `i` starts a new shot when its distance to frame `i-1` exceeds
/// `mean + alpha * stdev` of the preceding `window` distances and at least
/// `min_shot_ms` passed since the previous transition. The first distance has
/// no history and is never a transition.
#[derive(Debug, Clone)]
pub struct HistogramShotDetector {
    pub alpha: f64,
    pub window: usize,
    pub min_shot_ms: Millis,
}

impl From<&SegmenterConfig> for HistogramShotDetector {
    fn from(cfg: &SegmenterConfig) -> Self {
        HistogramShotDetector { alpha: cfg.alpha, window: cfg.window, min_shot_ms: cfg.min_shot_ms }
    }
}

impl ShotDetector for HistogramShotDetector {
    fn detect(&self, track: &VideoTrack) -> Vec<ShotTransition> {
        let frames = &track.frames;
        if frames.len() < 2 {
            warn!("video `{}` has {} frame(s); no shot transitions", track.video_id, frames.len());
            return Vec::new();
        }
        // dist[j] is the distance between frames j and j+1
        let dist: Vec<f64> = frames.windows(2).map(|w| l1_distance(&w[0].histogram, &w[1].histogram)).collect();
        let mut out: Vec<ShotTransition> = Vec::new();
        for j in 1..dist.len() {
            let history = &dist[j.saturating_sub(self.window)..j];
            let n = history.len() as f64;
            let mean = history.iter().sum::<f64>() / n;
            let var = history.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
            if dist[j] <= mean + self.alpha * var.sqrt() {
                continue;
            }
            let ts = frames[j + 1].timestamp_ms;
            if out.last().is_some_and(|prev| ts - prev.timestamp_ms < self.min_shot_ms) {
                continue;
            }
            out.push(ShotTransition { timestamp_ms: ts, score: dist[j] });
        }
        out
    }
}

pub fn detect_shot_transitions(track: &VideoTrack, cfg: &SegmenterConfig) -> Vec<ShotTransition> {
    HistogramShotDetector::from(cfg).detect(track)
}

/// Where a cut shifted to `shifted` lands.
///
/// If sentences are being spoken at `shifted`, the cut waits for the
/// longest of them to end. Otherwise, if a sentence starts within
/// `silence_ms`, the cut waits for it (earliest start, then longest).
/// Otherwise the cut is exactly `shifted`.
pub fn snap_cut(spans: &[SentenceSpan], shifted: Millis, silence_ms: Millis) -> (Millis, SnapRule) {
    let active = spans
        .iter()
        .filter(|s| s.start_ms <= shifted && shifted < s.end_ms)
        .map(|s| s.end_ms)
        .max();
    if let Some(end) = active {
        return (end, SnapRule::SentenceEnd);
    }
    let upcoming = spans
        .iter()
        .filter(|s| s.start_ms > shifted && s.start_ms - shifted <= silence_ms)
        .min_by_key(|s| (s.start_ms, std::cmp::Reverse(s.end_ms)));
    match upcoming {
        Some(s) => (s.end_ms, SnapRule::SentenceEnd),
        None => (shifted, SnapRule::SilencePassthrough),
    }
}

pub fn derive_cut_points(shots: &[ShotTransition], t: &Transcript, cfg: &SegmenterConfig) -> Vec<CutPoint> {
    let spans = sentence_spans(t, cfg.gap_ms);
    let mut cuts: Vec<CutPoint> = shots
        .iter()
        .map(|shot| {
            let shifted_ms = shot.timestamp_ms + cfg.k_seconds as Millis * 1000;
            let (cut_ms, snap_rule) = snap_cut(&spans, shifted_ms, cfg.silence_ms);
            CutPoint { cut_ms, source_shot_ms: shot.timestamp_ms, shifted_ms, snap_rule }
        })
        .collect();
    // stable: the earliest shot producing a given cut is kept
    cuts.sort_by_key(|c| c.cut_ms);
    cuts.dedup_by_key(|c| c.cut_ms);
    cuts
}

/// Tiles `[0, duration)` at the cut points.
///
/// Segments shorter than `min_segment_ms` are merged into their predecessor
/// (the first one into its successor). Each segment receives the cues whose
/// midpoint lies inside it and up to `max_keyframes` keyframes: the first
/// frame at or after each shot transition inside the segment, or the frame
/// closest to the segment's midpoint when there is none.
pub fn build_segments(
    track: &VideoTrack,
    cuts: &[CutPoint],
    shots: &[ShotTransition],
    t: &Transcript,
    cfg: &SegmenterConfig,
) -> Result<Vec<Segment>> {
    let duration = track.duration_ms;
    if duration == 0 {
        if !cuts.is_empty() {
            return Err(Error::InvalidInput(format!("video `{}` has zero duration but cuts", track.video_id)));
        }
        warn!("video `{}` has zero duration; no segments", track.video_id);
        return Ok(Vec::new());
    }
    let mut bounds = vec![0];
    for c in cuts {
        if c.cut_ms == 0 || c.cut_ms >= duration {
            return Err(Error::InvalidInput(format!(
                "cut at {} ms outside (0, {duration}) for video `{}`",
                c.cut_ms, track.video_id
            )));
        }
        if c.cut_ms <= *bounds.last().unwrap_or(&0) {
            return Err(Error::InvalidInput("cut points must be strictly increasing".into()));
        }
        bounds.push(c.cut_ms);
    }
    bounds.push(duration);

    let mut ranges: Vec<(Millis, Millis)> = Vec::new();
    for w in bounds.windows(2) {
        let (start, end) = (w[0], w[1]);
        match ranges.last_mut() {
            Some(last) if end - start < cfg.min_segment_ms => last.1 = end,
            _ => ranges.push((start, end)),
        }
    }
    if ranges.len() > 1 && ranges[0].1 - ranges[0].0 < cfg.min_segment_ms {
        let first = ranges.remove(0);
        ranges[0].0 = first.0;
    }

    Ok(ranges
        .into_iter()
        .map(|(start, end)| Segment {
            segment_id: Segment::make_id(&track.video_id, start),
            video_id: track.video_id.clone(),
            start_ms: start,
            end_ms: end,
            cue_indices: t
                .cues
                .iter()
                .filter(|c| (start..end).contains(&c.midpoint_ms()))
                .map(|c| c.index)
                .collect(),
            keyframe_timestamps: keyframes(track, shots, start, end, cfg.max_keyframes),
        })
        .collect())
}

fn keyframes(track: &VideoTrack, shots: &[ShotTransition], start: Millis, end: Millis, max: usize) -> Vec<Millis> {
    let mut out: Vec<Millis> = Vec::new();
    for shot in shots.iter().filter(|s| (start..end).contains(&s.timestamp_ms)) {
        if let Some(f) = track.frames_in(shot.timestamp_ms, end).first() {
            if out.last() != Some(&f.timestamp_ms) {
                out.push(f.timestamp_ms);
            }
        }
        if out.len() == max {
            break;
        }
    }
    if out.is_empty() {
        if let Some(f) = track.nearest_frame(start + (end - start) / 2) {
            out.push(f.timestamp_ms);
        }
    }
    out
}

/// Shot detection, cut derivation and segment building for one video.
/// Cuts that fall outside `(0, duration)` are dropped.
pub fn segment_video(
    track: &VideoTrack,
    t: &Transcript,
    cfg: &SegmenterConfig,
    detector: &dyn ShotDetector,
) -> Result<Vec<Segment>> {
    cfg.validate()?;
    let shots = detector.detect(track);
    let cuts: Vec<CutPoint> = derive_cut_points(&shots, t, cfg)
        .into_iter()
        .filter(|c| {
            let inside = c.cut_ms > 0 && c.cut_ms < track.duration_ms;
            if !inside {
                warn!("video `{}`: dropping cut at {} ms past the end", track.video_id, c.cut_ms);
            }
            inside
        })
        .collect();
    build_segments(track, &cuts, &shots, t, cfg)
}

/// One JSON object per line.
pub fn segments_to_jsonl(segments: &[Segment]) -> Result<String> {
    let mut out = String::new();
    for s in segments {
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn segments_from_jsonl(text: &str) -> Result<Vec<Segment>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string())))
        .collect()
}
