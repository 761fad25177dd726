//! Synthetic videos for tests and demos: solid-colour scenes with a
//! commentary line each, written as SRT, descriptor CSV, label spans and a
//! manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::clustering::ContextItem;
use crate::frames::{describe_frame, write_descriptor_csv, RgbImage, VideoTrack, DEFAULT_BINS};
use crate::models::IssueLabel;
use crate::pipeline::{write_file, Manifest, VideoEntry};
use crate::subtitle::{Cue, Transcript};
use crate::{Millis, Result};

pub const FRAME_INTERVAL_MS: Millis = 500;
/// Reaction shift the layout assumes (the segmenter default).
pub const SHIFT_MS: Millis = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Kept at histogram bin centres so jitter never crosses a bin.
    pub color: [u8; 3],
    pub millis: Millis,
    pub label: IssueLabel,
    pub line: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub video_id: String,
    pub scenes: Vec<Scene>,
}

/// Distinct scene colours, each channel at a 16-bin centre.
pub fn palette(i: usize) -> [u8; 3] {
    let c = |k: usize| (8 + 16 * (k % 16)) as u8;
    [c(i * 5 + 1), c(i * 11 + 3), c(i * 7 + 9)]
}

/// Commentary lines per label.
pub fn lines_for(label: IssueLabel) -> &'static [&'static str] {
    match label {
        IssueLabel::NonInformative => &[
            "Hey everyone welcome back to the stream.",
            "Thanks for the follow, really appreciate it.",
            "Let me grab a drink real quick.",
        ],
        IssueLabel::Logic => &[
            "The quest door is stuck and the guard never opens it.",
            "I fell through the floor and the quest marker vanished.",
            "The npc keeps walking into the wall and the quest never triggers.",
        ],
        IssueLabel::Presentation => &[
            "Look at that texture flicker, the wall is rendering black.",
            "The character model is stretched and the shadows glitch.",
            "The subtitles overlap and the texture popping is awful.",
        ],
        IssueLabel::Balance => &[
            "This boss is way too strong, one hit kills me.",
            "The sniper damage is unfair, it is totally overpowered.",
            "The enemy health is insane, this fight is unbalanced.",
        ],
        IssueLabel::Performance => &[
            "Huge lag spike, the framerate just dropped to nothing.",
            "The game stutters and freezes every few seconds.",
            "Massive fps drops and loading takes forever here.",
        ],
    }
}

/// A video cycling through `scenes` scenes; labels rotate from `offset`.
pub fn demo_video(video_id: &str, scenes: usize, offset: usize, seed: u64) -> SyntheticVideo {
    let mut rng = crate::rng::seeded(seed);
    let scenes = (0..scenes)
        .map(|i| {
            let label = IssueLabel::ALL[(i + offset) % IssueLabel::ALL.len()];
            let lines = lines_for(label);
            Scene {
                color: palette((i + offset) % IssueLabel::ALL.len()),
                millis: 15_000,
                label,
                line: lines[rng.gen_range(0..lines.len())].to_string(),
            }
        })
        .collect();
    SyntheticVideo { video_id: video_id.into(), scenes }
}

impl SyntheticVideo {
    pub fn duration_ms(&self) -> Millis {
        self.scenes.iter().map(|s| s.millis).sum()
    }

    fn scene_starts(&self) -> Vec<Millis> {
        self.scenes
            .iter()
            .scan(0, |t, s| {
                let start = *t;
                *t += s.millis;
                Some(start)
            })
            .collect()
    }

    /// One cue per scene, starting 9 s in so that it falls inside the
    /// segment that begins `SHIFT_MS` after the scene's shot.
    pub fn transcript(&self) -> Result<Transcript> {
        let cues = self
            .scenes
            .iter()
            .zip(self.scene_starts())
            .enumerate()
            .map(|(i, (s, start))| Cue {
                index: i as u32 + 1,
                start_ms: start + 9000,
                end_ms: start + 12_000,
                text: s.line.clone(),
            })
            .collect();
        Transcript::new(self.video_id.clone(), cues)
    }

    /// 8×8 frames every [`FRAME_INTERVAL_MS`] with ±3 pixel jitter.
    pub fn track(&self, seed: u64) -> Result<VideoTrack> {
        let mut rng = crate::rng::seeded(seed);
        let mut frames = Vec::new();
        for (s, start) in self.scenes.iter().zip(self.scene_starts()) {
            let mut t = start;
            while t < start + s.millis {
                let pixels = (0..64)
                    .map(|_| s.color.map(|c| (i32::from(c) + rng.gen_range(-3..=3)).clamp(0, 255) as u8))
                    .collect();
                let img = RgbImage { width: 8, height: 8, pixels };
                frames.push(describe_frame(t, &img, DEFAULT_BINS)?);
                t += FRAME_INTERVAL_MS;
            }
        }
        VideoTrack::new(self.video_id.clone(), frames, Some(self.duration_ms()))
    }

    /// Label spans aligned with the segments the default segmenter cuts.
    pub fn label_jsonl(&self) -> String {
        let n = self.scenes.len();
        let mut out = String::new();
        for (i, (s, start)) in self.scenes.iter().zip(self.scene_starts()).enumerate() {
            let from = if i == 0 { 0 } else { start + SHIFT_MS };
            let to = if i + 1 == n { self.duration_ms() } else { start + s.millis + SHIFT_MS };
            let _ = writeln!(
                out,
                "{{\"video_id\":\"{}\",\"start_ms\":{from},\"end_ms\":{to},\"label\":\"{}\"}}",
                self.video_id,
                s.label.as_str()
            );
        }
        out
    }
}

/// Writes every video's files plus `manifest.json` into `dir`; returns the
/// manifest path. Label files are written when `with_labels` is set.
pub fn write_dataset(dir: &Path, videos: &[SyntheticVideo], with_labels: bool, seed: u64) -> Result<PathBuf> {
    let mut entries = Vec::new();
    for (i, v) in videos.iter().enumerate() {
        let srt = format!("{}.srt", v.video_id);
        let csv = format!("{}.csv", v.video_id);
        write_file(&dir.join(&srt), &v.transcript()?.to_srt())?;
        write_file(&dir.join(&csv), &write_descriptor_csv(&v.track(seed.wrapping_add(i as u64))?))?;
        let labels = if with_labels {
            let name = format!("{}.labels.jsonl", v.video_id);
            write_file(&dir.join(&name), &v.label_jsonl())?;
            Some(PathBuf::from(name))
        } else {
            None
        };
        entries.push(VideoEntry {
            video_id: v.video_id.clone(),
            subtitles: srt.into(),
            frames: csv.into(),
            duration_ms: Some(v.duration_ms()),
            labels,
        });
    }
    let path = dir.join("manifest.json");
    write_file(&path, &Manifest::new(entries)?.to_json()?)?;
    Ok(path)
}

/// The standard three-video demo set.
pub fn demo_videos(seed: u64) -> Vec<SyntheticVideo> {
    (0..3).map(|i| demo_video(&format!("video{}", i + 1), 10, i, seed + i as u64)).collect()
}

/// Segments drawn from `n_scenes` planted scenes, `per_scene` each, with ids
/// interleaved across scenes. Every keyframe is the scene colour with up to
/// `max_noise` (a fraction) of its pixels replaced by random colours.
/// Returns the items and the true scene of each.
pub fn planted_contexts(
    n_scenes: usize,
    per_scene: usize,
    max_noise: f64,
    seed: u64,
) -> Result<(Vec<ContextItem>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&max_noise) {
        return Err(crate::Error::InvalidInput(format!("max_noise {max_noise} outside [0, 1]")));
    }
    let max_noisy = (max_noise * 100.0).round() as usize;
    let mut rng = crate::rng::seeded(seed);
    let mut items = Vec::with_capacity(n_scenes * per_scene);
    let mut truth = Vec::with_capacity(n_scenes * per_scene);
    for k in 0..per_scene {
        for scene in 0..n_scenes {
            let keyframes = (0..3)
                .map(|_| {
                    let noisy = rng.gen_range(0..=max_noisy);
                    let pixels = (0..100)
                        .map(|p| if p < noisy { rng.gen::<[u8; 3]>() } else { palette(scene) })
                        .collect();
                    let img = RgbImage { width: 10, height: 10, pixels };
                    Ok(describe_frame(0, &img, DEFAULT_BINS)?.histogram)
                })
                .collect::<Result<Vec<_>>>()?;
            items.push(ContextItem { segment_id: format!("seg{:04}", k * n_scenes + scene), keyframes });
            truth.push(scene);
        }
    }
    Ok((items, truth))
}
