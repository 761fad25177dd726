//! SRT and WebVTT ingestion.
//!
//! Both formats are normalized into a [`Transcript`]: markup is stripped,
//! whitespace collapsed, empty cues dropped and cues sorted by start time.
//! [`sentence_spans`] groups the cues into the spoken sentences used to
//! snap cut points.

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::{Error, Millis, Result};

/// One timed caption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cue {
    pub index: u32,
    pub start_ms: Millis,
    pub end_ms: Millis,
    pub text: String,
}

impl Cue {
    pub fn midpoint_ms(&self) -> Millis {
        self.start_ms + (self.end_ms - self.start_ms) / 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub video_id: String,
    pub cues: Vec<Cue>,
    /// BCP-47 tag, informational only.
    pub language: String,
}

impl Default for Transcript {
    fn default() -> Self {
        Transcript { video_id: String::new(), cues: Vec::new(), language: "und".into() }
    }
}

impl Transcript {
    /// Builds a transcript, sorting cues and checking their invariants.
    pub fn new(video_id: impl Into<String>, mut cues: Vec<Cue>) -> Result<Self> {
        for c in &cues {
            if c.start_ms >= c.end_ms {
                return Err(Error::InvalidInput(format!(
                    "cue {} has start {} >= end {}",
                    c.index, c.start_ms, c.end_ms
                )));
            }
        }
        cues.sort_by_key(|c| (c.start_ms, c.index));
        let mut seen: Vec<u32> = cues.iter().map(|c| c.index).collect();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!("duplicate cue index {}", w[0])));
        }
        Ok(Transcript { video_id: video_id.into(), cues, language: "und".into() })
    }

    pub fn with_video_id(mut self, video_id: impl Into<String>) -> Self {
        self.video_id = video_id.into();
        self
    }

    pub fn cue(&self, index: u32) -> Option<&Cue> {
        self.cues.iter().find(|c| c.index == index)
    }

    /// Canonical SRT rendering; parsing it back yields an equal transcript.
    pub fn to_srt(&self) -> String {
        let mut out = String::new();
        for c in &self.cues {
            let _ = write!(
                out,
                "{}\n{} --> {}\n{}\n\n",
                c.index,
                format_srt_time(c.start_ms),
                format_srt_time(c.end_ms),
                c.text
            );
        }
        out
    }
}

/// A run of consecutive cues forming one spoken sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start_ms: Millis,
    pub end_ms: Millis,
    pub cue_indices: Vec<u32>,
    pub text: String,
}

fn normalize_lines(bytes: &[u8]) -> Result<Vec<String>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Format(format!("subtitle is not valid UTF-8: {e}")))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let text = text.replace("\r\n", "\n").replace('\r', "\n");
    Ok(text.split('\n').map(str::to_string).collect())
}

/// Strips `<...>` and `{\...}` markup, decodes the common entities and
/// collapses whitespace.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars().peekable();
    while let Some(ch) = chars.next() {
        match ch {
            '<' => {
                for c in chars.by_ref() {
                    if c == '>' {
                        break;
                    }
                }
            }
            '{' if chars.peek() == Some(&'\\') => {
                for c in chars.by_ref() {
                    if c == '}' {
                        break;
                    }
                }
            }
            _ => out.push(ch),
        }
    }
    let out = out
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&nbsp;", " ")
        .replace("&amp;", "&");
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `[HH:]MM:SS(,|.)mmm`. Hours are optional only when `allow_short`.
fn parse_timestamp(s: &str, allow_short: bool) -> Option<Millis> {
    let s = s.trim();
    let (clock, frac) = s.rsplit_once([',', '.'])?;
    if frac.len() != 3 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let millis: u64 = frac.parse().ok()?;
    let parts: Vec<&str> = clock.split(':').collect();
    let (h, m, sec) = match parts.as_slice() {
        [h, m, s] => (*h, *m, *s),
        [m, s] if allow_short => ("0", *m, *s),
        _ => return None,
    };
    let num = |v: &str| -> Option<u64> {
        if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
            None
        } else {
            v.parse().ok()
        }
    };
    let (h, m, sec) = (num(h)?, num(m)?, num(sec)?);
    if m >= 60 || sec >= 60 || (parts.len() == 3 && parts[1].len() != 2) || parts.last()?.len() != 2 {
        return None;
    }
    Some(((h * 60 + m) * 60 + sec) * 1000 + millis)
}

fn format_srt_time(ms: Millis) -> String {
    let (h, rem) = (ms / 3_600_000, ms % 3_600_000);
    let (m, rem) = (rem / 60_000, rem % 60_000);
    format!("{:02}:{:02}:{:02},{:03}", h, m, rem / 1000, rem % 1000)
}

/// Parses a `start --> end [settings]` line.
fn parse_timing(line: &str, line_no: usize, vtt: bool) -> Result<(Millis, Millis)> {
    let (lhs, rhs) = line
        .split_once("-->")
        .ok_or_else(|| Error::parse(line_no, "expected `-->` timing line"))?;
    let end_tok = rhs.split_whitespace().next().unwrap_or("");
    let start = parse_timestamp(lhs, vtt)
        .ok_or_else(|| Error::parse(line_no, format!("malformed start timestamp `{}`", lhs.trim())))?;
    let end = parse_timestamp(end_tok, vtt)
        .ok_or_else(|| Error::parse(line_no, format!("malformed end timestamp `{end_tok}`")))?;
    if end < start {
        return Err(Error::parse(line_no, format!("cue ends ({end} ms) before it starts ({start} ms)")));
    }
    Ok((start, end))
}

/// Groups lines into blank-line separated blocks, keeping the 1-based line
/// number of each block's first line.
fn blocks(lines: &[String]) -> Vec<(usize, Vec<&str>)> {
    let mut out = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    let mut first = 0;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push((first, std::mem::take(&mut cur)));
            }
        } else {
            if cur.is_empty() {
                first = i + 1;
            }
            cur.push(line.as_str());
        }
    }
    if !cur.is_empty() {
        out.push((first, cur));
    }
    out
}

fn push_cue(cues: &mut Vec<Cue>, index: u32, start: Millis, end: Millis, text: &[&str], line_no: usize) {
    let text = clean_text(&text.join(" "));
    if start == end {
        warn!("dropping zero-length cue {index} at line {line_no}");
    } else if text.is_empty() {
        warn!("dropping empty cue {index} at line {line_no}");
    } else {
        cues.push(Cue { index, start_ms: start, end_ms: end, text });
    }
}

pub fn parse_srt(bytes: &[u8]) -> Result<Transcript> {
    let lines = normalize_lines(bytes)?;
    let mut cues = Vec::new();
    let mut ordinal = 0u32;
    for (first, block) in blocks(&lines) {
        ordinal += 1;
        let (index, timing_at) = if block[0].contains("-->") {
            (ordinal, 0)
        } else {
            let idx: u32 = block[0]
                .trim()
                .parse()
                .map_err(|_| Error::parse(first, format!("expected cue index, got `{}`", block[0].trim())))?;
            if idx == 0 {
                return Err(Error::parse(first, "cue index must be >= 1"));
            }
            (idx, 1)
        };
        let line_no = first + timing_at;
        let timing = block
            .get(timing_at)
            .ok_or_else(|| Error::parse(line_no, "missing timing line"))?;
        let (start, end) = parse_timing(timing, line_no, false)?;
        push_cue(&mut cues, index, start, end, &block[timing_at + 1..], line_no);
    }
    Transcript::new("", cues).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::parse(0, msg),
        other => other,
    })
}

pub fn parse_vtt(bytes: &[u8]) -> Result<Transcript> {
    let lines = normalize_lines(bytes)?;
    let header = lines.first().map(|l| l.trim_end()).unwrap_or("");
    let valid_header = header == "WEBVTT"
        || header.starts_with("WEBVTT ")
        || header.starts_with("WEBVTT\t");
    if !valid_header {
        return Err(Error::Format("missing WEBVTT header".into()));
    }
    let mut cues = Vec::new();
    let mut ordinal = 0u32;
    // the first block is the header and its metadata lines
    for (first, block) in blocks(&lines).into_iter().skip(1) {
        let head = block[0].trim_start();
        if head.starts_with("NOTE") || head.starts_with("STYLE") || head.starts_with("REGION") {
            continue;
        }
        let timing_at = if block[0].contains("-->") { 0 } else { 1 };
        let line_no = first + timing_at;
        let timing = block
            .get(timing_at)
            .ok_or_else(|| Error::parse(line_no, "missing timing line"))?;
        let (start, end) = parse_timing(timing, line_no, true)?;
        ordinal += 1;
        push_cue(&mut cues, ordinal, start, end, &block[timing_at + 1..], line_no);
    }
    Transcript::new("", cues)
}

/// Dispatches on the file extension (`.vtt` or anything else as SRT).
pub fn load_subtitles(path: &std::path::Path) -> Result<Transcript> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let is_vtt = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("vtt"));
    if is_vtt {
        parse_vtt(&bytes)
    } else {
        parse_srt(&bytes)
    }
}

fn ends_sentence(text: &str) -> bool {
    let trimmed = text.trim_end_matches(['"', '\'', ')', ']', '”', '’', '»']);
    trimmed.ends_with(['.', '!', '?', '…'])
}

/// Partitions the cue list into sentences. A sentence ends at a cue whose
/// text ends with terminal punctuation, before a silence longer than
/// `gap_ms`, or at the last cue.
pub fn sentence_spans(t: &Transcript, gap_ms: Millis) -> Vec<SentenceSpan> {
    let mut spans = Vec::new();
    let mut cur: Vec<&Cue> = Vec::new();
    for (i, cue) in t.cues.iter().enumerate() {
        cur.push(cue);
        let closes = match t.cues.get(i + 1) {
            None => true,
            Some(next) => ends_sentence(&cue.text) || next.start_ms.saturating_sub(cue.end_ms) > gap_ms,
        };
        if closes {
            spans.push(SentenceSpan {
                start_ms: cur[0].start_ms,
                end_ms: cue.end_ms,
                cue_indices: cur.iter().map(|c| c.index).collect(),
                text: cur.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join(" "),
            });
            cur.clear();
        }
    }
    spans
}
