//! Frame ingestion: PPM decoding, color histograms and descriptor tracks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Millis, Result};

pub const DEFAULT_BINS: usize = 16;
/// Descriptor length for the default 16 bins per RGB channel.
pub const DESCRIPTOR_LEN: usize = 3 * DEFAULT_BINS;

const BLOCK_TOLERANCE: f64 = 1e-9;

/// Decoded RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        RgbImage { width, height, pixels: vec![rgb; width * height] }
    }

    /// Binary P6 encoding.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDescriptor {
    pub timestamp_ms: Millis,
    /// Per-channel (R, G, B) blocks, each L1-normalized.
    pub histogram: Vec<f64>,
    pub luminance_mean: f64,
}

impl FrameDescriptor {
    pub fn bins_per_channel(&self) -> usize {
        self.histogram.len() / 3
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.histogram.len();
        if len == 0 || !len.is_multiple_of(3) {
            return Err(Error::InvalidInput(format!("histogram length {len} is not 3 channel blocks")));
        }
        if !(0.0..=1.0).contains(&self.luminance_mean) {
            return Err(Error::InvalidInput(format!(
                "frame {}: luminance {} outside [0,1]",
                self.timestamp_ms, self.luminance_mean
            )));
        }
        for (c, block) in self.histogram.chunks(len / 3).enumerate() {
            if block.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "frame {}: channel {c} has negative or non-finite bins",
                    self.timestamp_ms
                )));
            }
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > BLOCK_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "frame {}: channel {c} sums to {sum}, expected 1",
                    self.timestamp_ms
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoTrack {
    pub video_id: String,
    pub frames: Vec<FrameDescriptor>,
    pub duration_ms: Millis,
}

impl VideoTrack {
    /// Sorts frames and rejects duplicate timestamps. Duration defaults to
    /// the last timestamp.
    pub fn new(video_id: impl Into<String>, mut frames: Vec<FrameDescriptor>, duration_ms: Option<Millis>) -> Result<Self> {
        frames.sort_by_key(|f| f.timestamp_ms);
        if let Some(w) = frames.windows(2).find(|w| w[0].timestamp_ms == w[1].timestamp_ms) {
            return Err(Error::InvalidInput(format!("duplicate frame timestamp {}", w[0].timestamp_ms)));
        }
        let last = frames.last().map_or(0, |f| f.timestamp_ms);
        let duration_ms = duration_ms.unwrap_or(last);
        if last > duration_ms {
            return Err(Error::InvalidInput(format!(
                "last frame at {last} ms exceeds duration {duration_ms} ms"
            )));
        }
        Ok(VideoTrack { video_id: video_id.into(), frames, duration_ms })
    }

    /// Frames with timestamp in `[start, end)`.
    pub fn frames_in(&self, start: Millis, end: Millis) -> &[FrameDescriptor] {
        let lo = self.frames.partition_point(|f| f.timestamp_ms < start);
        let hi = self.frames.partition_point(|f| f.timestamp_ms < end);
        &self.frames[lo..hi]
    }

    pub fn frame_at(&self, timestamp_ms: Millis) -> Option<&FrameDescriptor> {
        self.frames
            .binary_search_by_key(&timestamp_ms, |f| f.timestamp_ms)
            .ok()
            .map(|i| &self.frames[i])
    }

    /// Frame whose timestamp is closest to `t` (earlier one on ties).
    pub fn nearest_frame(&self, t: Millis) -> Option<&FrameDescriptor> {
        let i = self.frames.partition_point(|f| f.timestamp_ms < t);
        let after = self.frames.get(i);
        let before = i.checked_sub(1).and_then(|j| self.frames.get(j));
        match (before, after) {
            (Some(b), Some(a)) => Some(if t - b.timestamp_ms <= a.timestamp_ms - t { b } else { a }),
            (b, a) => b.or(a),
        }
    }
}

/// Per-channel histogram with `bins` bins plus mean Rec.601 luma in `[0,1]`.
pub fn compute_histogram(image: &RgbImage, bins: usize) -> Result<(Vec<f64>, f64)> {
    if !(2..=64).contains(&bins) {
        return Err(Error::InvalidInput(format!("bins_per_channel {bins} outside [2, 64]")));
    }
    if image.pixels.is_empty() {
        return Err(Error::InvalidInput("image has no pixels".into()));
    }
    let mut counts = vec![0u64; 3 * bins];
    let mut luma = 0.0;
    for p in &image.pixels {
        for (c, &v) in p.iter().enumerate() {
            counts[c * bins + v as usize * bins / 256] += 1;
        }
        luma += (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0;
    }
    let n = image.pixels.len() as f64;
    let hist = counts.into_iter().map(|c| c as f64 / n).collect();
    Ok((hist, (luma / n).clamp(0.0, 1.0)))
}

pub fn describe_frame(timestamp_ms: Millis, image: &RgbImage, bins: usize) -> Result<FrameDescriptor> {
    let (histogram, luminance_mean) = compute_histogram(image, bins)?;
    Ok(FrameDescriptor { timestamp_ms, histogram, luminance_mean })
}

/// L1 distance between two histograms; at most 6 for 3-block histograms.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

struct PpmTokens<'a> {
    data: &'a [u8],
    pos: usize,
}

impl PpmTokens<'_> {
    fn next_token(&mut self) -> Option<&str> {
        loop {
            while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.data.len() && self.data[self.pos] == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() && self.data[self.pos] != b'#' {
            self.pos += 1;
        }
        (start < self.pos).then(|| std::str::from_utf8(&self.data[start..self.pos]).unwrap_or(""))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self
            .next_token()
            .ok_or_else(|| Error::Format(format!("PPM truncated before {what}")))?;
        tok.parse()
            .map_err(|_| Error::Format(format!("PPM {what} is not a number: `{tok}`")))
    }
}

/// Decodes binary (P6) or ASCII (P3) PPM with maxval 255.
pub fn parse_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let mut tok = PpmTokens { data: bytes, pos: 0 };
    let magic = tok.next_token().unwrap_or("").to_string();
    let binary = match magic.as_str() {
        "P6" => true,
        "P3" => false,
        other => return Err(Error::Format(format!("unsupported PPM magic `{other}`"))),
    };
    let width = tok.number("width")?;
    let height = tok.number("height")?;
    let maxval = tok.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("PPM maxval {maxval} unsupported, expected 255")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("PPM dimensions overflow".into()))?;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates maxval from the raster
        let start = tok.pos + 1;
        let raster = bytes.get(start..).unwrap_or(&[]);
        if raster.len() < n * 3 {
            return Err(Error::Format(format!(
                "PPM truncated: {} of {} pixels present",
                raster.len() / 3,
                n
            )));
        }
        pixels.extend(raster[..n * 3].chunks_exact(3).map(|c| [c[0], c[1], c[2]]));
    } else {
        for i in 0..n {
            let mut px = [0u8; 3];
            for v in px.iter_mut() {
                let sample = tok
                    .next_token()
                    .ok_or_else(|| Error::Format(format!("PPM truncated: {i} of {n} pixels present")))?;
                let value: usize = sample
                    .parse()
                    .map_err(|_| Error::Format(format!("PPM sample is not a number: `{sample}`")))?;
                if value > 255 {
                    return Err(Error::Format(format!("PPM sample {value} exceeds maxval")));
                }
                *v = value as u8;
            }
            pixels.push(px);
        }
    }
    Ok(RgbImage { width, height, pixels })
}

/// Descriptor CSV: header `timestamp_ms,h0..h{3B-1},luminance`, LF endings.
pub fn write_descriptor_csv(track: &VideoTrack) -> String {
    let len = track.frames.first().map_or(DESCRIPTOR_LEN, |f| f.histogram.len());
    let mut out = String::from("timestamp_ms");
    for i in 0..len {
        let _ = write!(out, ",h{i}");
    }
    out.push_str(",luminance\n");
    for f in &track.frames {
        let _ = write!(out, "{}", f.timestamp_ms);
        for v in &f.histogram {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{}", f.luminance_mean);
    }
    out
}

pub fn parse_descriptor_csv(video_id: &str, text: &str, duration_ms: Option<Millis>) -> Result<VideoTrack> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = match lines.next() {
        Some(h) => h,
        None => return VideoTrack::new(video_id, Vec::new(), duration_ms),
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let n_bins = cols.len().saturating_sub(2);
    let header_ok = cols.len() >= 5
        && cols[0] == "timestamp_ms"
        && cols[cols.len() - 1] == "luminance"
        && n_bins.is_multiple_of(3)
        && (0..n_bins).all(|i| cols[i + 1] == format!("h{i}"));
    if !header_ok {
        return Err(Error::parse(1, "descriptor CSV header must be `timestamp_ms,h0..hN,luminance`"));
    }
    let mut frames: Vec<FrameDescriptor> = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::parse(line_no, format!("expected {} fields, got {}", cols.len(), fields.len())));
        }
        let timestamp_ms: Millis = fields[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad timestamp `{}`", fields[0])))?;
        let mut values = Vec::with_capacity(n_bins + 1);
        for f in &fields[1..] {
            values.push(f.parse::<f64>().map_err(|_| Error::parse(line_no, format!("bad number `{f}`")))?);
        }
        let luminance_mean = values.pop().unwrap_or(0.0);
        if let Some(prev) = frames.last() {
            if timestamp_ms <= prev.timestamp_ms {
                return Err(Error::parse(
                    line_no,
                    format!("timestamp {timestamp_ms} not after previous {}", prev.timestamp_ms),
                ));
            }
        }
        let frame = FrameDescriptor { timestamp_ms, histogram: values, luminance_mean };
        frame.validate().map_err(|e| Error::parse(line_no, e.to_string()))?;
        frames.push(frame);
    }
    VideoTrack::new(video_id, frames, duration_ms)
}

/// Loads a track from a directory of `<timestamp_ms>.ppm` frames or from a
/// descriptor CSV file.
pub fn load_track(path: &Path, video_id: &str, bins: usize, duration_ms: Option<Millis>) -> Result<VideoTrack> {
    if path.is_dir() {
        let mut sources: BTreeMap<Millis, PathBuf> = BTreeMap::new();
        let entries = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        for entry in entries {
            let p = entry.map_err(|e| Error::io(path, e))?.path();
            let is_ppm = p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("ppm"));
            let stamp = p.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<Millis>().ok());
            match (is_ppm, stamp) {
                (true, Some(ts)) => {
                    if let Some(prev) = sources.insert(ts, p.clone()) {
                        return Err(Error::InvalidInput(format!(
                            "duplicate frame timestamp {ts}: {} and {}",
                            prev.display(),
                            p.display()
                        )));
                    }
                }
                _ => warn!("ignoring {} (not named <timestamp_ms>.ppm)", p.display()),
            }
        }
        if sources.is_empty() {
            warn!("no frames found in {}", path.display());
        }
        let frames = sources
            .into_par_iter()
            .map(|(ts, p)| {
                let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
                let image = parse_ppm(&bytes).map_err(|e| Error::Format(format!("{}: {e}", p.display())))?;
                describe_frame(ts, &image, bins)
            })
            .collect::<Result<Vec<_>>>()?;
        VideoTrack::new(video_id, frames, duration_ms)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_descriptor_csv(video_id, &text, duration_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block(hist: &[f64], c: usize) -> &[f64] {
        &hist[c * 16..(c + 1) * 16]
    }

    #[test]
    fn black_image() {
        let (h, l) = compute_histogram(&RgbImage::filled(2, 2, [0, 0, 0]), 16).unwrap();
        for c in 0..3 {
            let mut want = vec![0.0; 16];
            want[0] = 1.0;
            assert_eq!(block(&h, c), want.as_slice());
        }
        assert_eq!(l, 0.0);
    }

    #[test]
    fn white_image() {
        let (h, l) = compute_histogram(&RgbImage::filled(3, 1, [255, 255, 255]), 16).unwrap();
        for c in 0..3 {
            assert_eq!(block(&h, c)[15], 1.0);
            assert_eq!(block(&h, c).iter().sum::<f64>(), 1.0);
        }
        assert!((l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_black_half_white() {
        let mut img = RgbImage::filled(2, 2, [0, 0, 0]);
        img.pixels[2] = [255, 255, 255];
        img.pixels[3] = [255, 255, 255];
        let (h, l) = compute_histogram(&img, 16).unwrap();
        for c in 0..3 {
            let b = block(&h, c);
            assert_eq!(b[0], 0.5);
            assert_eq!(b[15], 0.5);
            assert_eq!(b[1..15].iter().sum::<f64>(), 0.0);
        }
        assert!((l - 0.5).abs() < 1e-12);
    }

    #[test]
    fn histogram_errors() {
        let empty = RgbImage { width: 0, height: 0, pixels: vec![] };
        assert!(compute_histogram(&empty, 16).is_err());
        assert!(compute_histogram(&RgbImage::filled(1, 1, [0, 0, 0]), 1).is_err());
        assert!(compute_histogram(&RgbImage::filled(1, 1, [0, 0, 0]), 65).is_err());
    }

    #[test]
    fn ppm_ascii_with_comment() {
        let a = parse_ppm(b"P3 1 1 255 0 0 0").unwrap();
        assert_eq!(a, RgbImage::filled(1, 1, [0, 0, 0]));
        let b = parse_ppm(b"P3\n# made by hand\n1 1\n# maxval next\n255\n0 0 0\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ppm_binary_and_truncation() {
        let img = RgbImage::filled(2, 2, [10, 20, 30]);
        let bytes = img.to_ppm();
        assert_eq!(parse_ppm(&bytes).unwrap(), img);
        let truncated = &bytes[..bytes.len() - 3];
        let err = parse_ppm(truncated).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn ppm_bad_header() {
        assert!(matches!(parse_ppm(b"P5 1 1 255 0").unwrap_err(), Error::Format(_)));
        assert!(matches!(parse_ppm(b"P3 1 1 65535 0 0 0").unwrap_err(), Error::Format(_)));
    }

    fn write_frame(dir: &Path, name: &str, rgb: [u8; 3]) {
        std::fs::write(dir.join(name), RgbImage::filled(2, 2, rgb).to_ppm()).unwrap();
    }

    #[test]
    fn track_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path(), "500.ppm", [255, 255, 255]);
        write_frame(dir.path(), "0.ppm", [0, 0, 0]);
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let track = load_track(dir.path(), "v", 16, None).unwrap();
        let stamps: Vec<_> = track.frames.iter().map(|f| f.timestamp_ms).collect();
        assert_eq!(stamps, vec![0, 500]);
        assert_eq!(track.duration_ms, 500);
    }

    #[test]
    fn track_duplicate_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path(), "500.ppm", [0, 0, 0]);
        write_frame(dir.path(), "0500.ppm", [0, 0, 0]);
        let err = load_track(dir.path(), "v", 16, None).unwrap_err().to_string();
        assert!(err.contains("500.ppm") && err.contains("0500.ppm"), "{err}");
    }

    #[test]
    fn empty_directory_gives_empty_track() {
        let dir = tempfile::tempdir().unwrap();
        let track = load_track(dir.path(), "v", 16, None).unwrap();
        assert!(track.frames.is_empty());
    }

    fn csv_row(ts: u64, lum: f64) -> String {
        let mut hist = vec!["0".to_string(); 48];
        for c in 0..3 {
            hist[c * 16] = "1".into();
        }
        format!("{ts},{},{lum}", hist.join(","))
    }

    fn csv_header() -> String {
        let names: Vec<String> = (0..48).map(|i| format!("h{i}")).collect();
        format!("timestamp_ms,{},luminance", names.join(","))
    }

    #[test]
    fn csv_row_parses() {
        let text = format!("{}\n{}\n", csv_header(), csv_row(1000, 0.5));
        let track = parse_descriptor_csv("v", &text, None).unwrap();
        assert_eq!(track.frames.len(), 1);
        assert_eq!(track.frames[0].timestamp_ms, 1000);
        assert_eq!(track.frames[0].luminance_mean, 0.5);
    }

    #[test]
    fn csv_non_monotone_rejected() {
        let text = format!("{}\n{}\n{}\n", csv_header(), csv_row(1000, 0.5), csv_row(500, 0.5));
        assert!(matches!(parse_descriptor_csv("v", &text, None).unwrap_err(), Error::Parse { line: 3, .. }));
    }

    #[test]
    fn csv_bad_block_rejected() {
        let row = csv_row(0, 0.5).replacen(",1,", ",0.9,", 1);
        let text = format!("{}\n{row}\n", csv_header());
        assert!(parse_descriptor_csv("v", &text, None).is_err());
    }

    fn arb_image() -> impl Strategy<Value = RgbImage> {
        prop::collection::vec(any::<[u8; 3]>(), 1..64)
            .prop_map(|pixels| RgbImage { width: pixels.len(), height: 1, pixels })
    }

    proptest! {
        #[test]
        fn blocks_sum_to_one(img in arb_image(), bins in 2usize..=64) {
            let (h, l) = compute_histogram(&img, bins).unwrap();
            for b in h.chunks(bins) {
                prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            prop_assert!((0.0..=1.0).contains(&l));
        }

        #[test]
        fn permutation_invariant(img in arb_image(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = img.clone();
            shuffled.pixels.shuffle(&mut crate::rng::seeded(seed));
            let (a, _) = compute_histogram(&img, 16).unwrap();
            let (b, _) = compute_histogram(&shuffled, 16).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn csv_round_trip(imgs in prop::collection::vec(arb_image(), 0..6)) {
            let frames = imgs
                .iter()
                .enumerate()
                .map(|(i, img)| describe_frame(i as u64 * 40, img, 16).unwrap())
                .collect();
            let track = VideoTrack::new("v", frames, None).unwrap();
            let back = parse_descriptor_csv("v", &write_descriptor_csv(&track), None).unwrap();
            for (a, b) in track.frames.iter().zip(&back.frames) {
                prop_assert_eq!(a.timestamp_ms, b.timestamp_ms);
                for (x, y) in a.histogram.iter().zip(&b.histogram) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
                prop_assert!((a.luminance_mean - b.luminance_mean).abs() < 1e-9);
            }
            prop_assert_eq!(back.frames.len(), track.frames.len());
        }
    }
}
