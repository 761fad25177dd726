//! Segment feature extraction and SMOTE rebalancing.
//!
//! Every feature carries a group prefix (`text:`, `emb:`, `video:`,
//! `speech:`) so that model variants can be produced by masking groups of an
//! assembled vector.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::frames::{l1_distance, VideoTrack};
use crate::segmentation::Segment;
use crate::subtitle::Transcript;
use crate::{Error, Result};

/// Frames darker than this mean luminance count as blank.
pub const BLANK_LUMINANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Text,
    Embedding,
    Video,
    Speech,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [FeatureGroup::Text, FeatureGroup::Embedding, FeatureGroup::Video, FeatureGroup::Speech];

    pub fn prefix(self) -> &'static str {
        match self {
            FeatureGroup::Text => "text:",
            FeatureGroup::Embedding => "emb:",
            FeatureGroup::Video => "video:",
            FeatureGroup::Speech => "speech:",
        }
    }

    pub fn of(name: &str) -> Option<FeatureGroup> {
        FeatureGroup::ALL.into_iter().find(|g| name.starts_with(g.prefix()))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Text => "text",
            FeatureGroup::Embedding => "embedding",
            FeatureGroup::Video => "video",
            FeatureGroup::Speech => "speech",
        }
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown feature group `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub segment_id: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn empty(segment_id: impl Into<String>) -> Self {
        FeatureVector { segment_id: segment_id.into(), names: Vec::new(), values: Vec::new() }
    }

    fn from_pairs(segment_id: &str, pairs: Vec<(String, f64)>) -> Self {
        let (names, values) = pairs.into_iter().unzip();
        FeatureVector { segment_id: segment_id.to_string(), names, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn concat(mut self, other: FeatureVector) -> Self {
        self.names.extend(other.names);
        self.values.extend(other.values);
        self
    }

    /// Keeps only features of the given groups, preserving order.
    pub fn mask(&self, groups: &[FeatureGroup]) -> Self {
        let (names, values) = self
            .names
            .iter()
            .zip(&self.values)
            .filter(|(n, _)| FeatureGroup::of(n).is_some_and(|g| groups.contains(&g)))
            .map(|(n, v)| (n.clone(), *v))
            .unzip();
        FeatureVector { segment_id: self.segment_id.clone(), names, values }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "i", "if", "in", "is", "it", "its",
    "me", "my", "of", "on", "or", "so", "that", "the", "this", "to", "was", "we", "with", "you",
];

/// Lowercased maximal alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabularyConfig {
    /// 1 for unigrams, 2 for unigrams and bigrams.
    pub ngram_max: usize,
    pub stopwords: BTreeSet<String>,
    pub min_df: u32,
}

impl Default for VocabularyConfig {
    fn default() -> Self {
        VocabularyConfig {
            ngram_max: 1,
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            min_df: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Sorted lexicographically.
    pub terms: Vec<String>,
    pub document_frequencies: Vec<u32>,
    pub n_documents: u32,
    pub ngram_max: usize,
    pub stopwords: BTreeSet<String>,
}

fn ngrams(text: &str, ngram_max: usize, stopwords: &BTreeSet<String>) -> Vec<String> {
    let tokens: Vec<String> = tokenize(text).into_iter().filter(|t| !stopwords.contains(t)).collect();
    let mut out = tokens.clone();
    for n in 2..=ngram_max {
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

pub fn fit_vocabulary(texts: &[&str], cfg: &VocabularyConfig) -> Result<Vocabulary> {
    if texts.is_empty() {
        return Err(Error::InvalidInput("vocabulary needs at least one document".into()));
    }
    if !(1..=2).contains(&cfg.ngram_max) {
        return Err(Error::Config(format!("ngram_max must be 1 or 2, got {}", cfg.ngram_max)));
    }
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    for text in texts {
        let terms: BTreeSet<String> = ngrams(text, cfg.ngram_max, &cfg.stopwords).into_iter().collect();
        for t in terms {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::InvalidInput("all documents are empty".into()));
    }
    let (terms, document_frequencies): (Vec<_>, Vec<_>) = df.into_iter().filter(|(_, d)| *d >= cfg.min_df).unzip();
    if terms.is_empty() {
        return Err(Error::InvalidInput(format!("no surviving terms with min_df = {}", cfg.min_df)));
    }
    Ok(Vocabulary {
        terms,
        document_frequencies,
        n_documents: texts.len() as u32,
        ngram_max: cfg.ngram_max,
        stopwords: cfg.stopwords.clone(),
    })
}

impl Vocabulary {
    pub fn idf(&self, term_idx: usize) -> f64 {
        let n = self.n_documents as f64;
        ((1.0 + n) / (1.0 + self.document_frequencies[term_idx] as f64)).ln() + 1.0
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }
}

/// L2-normalized tf-idf over the fitted vocabulary; unknown terms ignored.
pub fn text_features(segment_id: &str, text: &str, vocab: &Vocabulary) -> FeatureVector {
    let mut weights = vec![0.0; vocab.terms.len()];
    for term in ngrams(text, vocab.ngram_max, &vocab.stopwords) {
        if let Some(i) = vocab.index_of(&term) {
            weights[i] += 1.0;
        }
    }
    for (i, w) in weights.iter_mut().enumerate() {
        *w *= vocab.idf(i);
    }
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        weights.iter_mut().for_each(|w| *w /= norm);
    }
    FeatureVector {
        segment_id: segment_id.to_string(),
        names: vocab.terms.iter().map(|t| format!("text:{t}")).collect(),
        values: weights,
    }
}

/// Pretrained token vectors, loaded from `token v1 ... vd` lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut vectors = BTreeMap::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values = parts
                .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::parse(i + 1, "embedding values must be finite numbers"))?;
            let d = *dim.get_or_insert(values.len());
            if values.len() != d || d == 0 {
                return Err(Error::parse(i + 1, format!("expected {d} dimensions, got {}", values.len())));
            }
            vectors.insert(token.to_lowercase(), values);
        }
        let dim = dim.ok_or_else(|| Error::InvalidInput("embedding table is empty".into()))?;
        Ok(EmbeddingTable { dim, vectors })
    }
}

/// Mean of the vectors of in-table tokens; zero when none is known.
pub fn embedding_features(segment_id: &str, text: &str, table: &EmbeddingTable) -> FeatureVector {
    let mut sum = vec![0.0; table.dim];
    let mut n = 0usize;
    for tok in tokenize(text) {
        if let Some(v) = table.vectors.get(&tok) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            n += 1;
        }
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    FeatureVector {
        segment_id: segment_id.to_string(),
        names: (0..table.dim).map(|i| format!("emb:{i}")).collect(),
        values: sum,
    }
}

pub fn video_features(segment: &Segment, track: &VideoTrack) -> FeatureVector {
    let frames = track.frames_in(segment.start_ms, segment.end_ms);
    let n = frames.len();
    let dists: Vec<f64> = frames.windows(2).map(|w| l1_distance(&w[0].histogram, &w[1].histogram)).collect();
    let (motion_mean, motion_std) = if dists.is_empty() {
        (0.0, 0.0)
    } else {
        let m = dists.iter().sum::<f64>() / dists.len() as f64;
        let var = dists.iter().map(|d| (d - m).powi(2)).sum::<f64>() / dists.len() as f64;
        (m, var.sqrt())
    };
    let (lum, blank) = if n == 0 {
        (0.0, 0.0)
    } else {
        (
            frames.iter().map(|f| f.luminance_mean).sum::<f64>() / n as f64,
            frames.iter().filter(|f| f.luminance_mean < BLANK_LUMINANCE).count() as f64 / n as f64,
        )
    };
    FeatureVector::from_pairs(
        &segment.segment_id,
        vec![
            ("video:duration_s".into(), segment.duration_ms() as f64 / 1000.0),
            ("video:n_frames".into(), n as f64),
            ("video:motion_mean".into(), motion_mean),
            ("video:motion_std".into(), motion_std),
            ("video:luminance_mean".into(), lum),
            ("video:blank_fraction".into(), blank),
            ("video:had_video".into(), if n >= 2 { 1.0 } else { 0.0 }),
        ],
    )
}

/// Speech timing stands in for the audio channel.
pub fn speech_features(segment: &Segment, t: &Transcript) -> FeatureVector {
    let duration = segment.duration_ms() as f64;
    let overlap: u64 = t
        .cues
        .iter()
        .map(|c| c.end_ms.min(segment.end_ms).saturating_sub(c.start_ms.max(segment.start_ms)))
        .sum();
    let words: usize = segment
        .cue_indices
        .iter()
        .filter_map(|i| t.cue(*i))
        .map(|c| c.text.split_whitespace().count())
        .sum();
    let (density, rate) = if duration > 0.0 {
        (overlap as f64 / duration, words as f64 / (duration / 1000.0))
    } else {
        (0.0, 0.0)
    };
    FeatureVector::from_pairs(
        &segment.segment_id,
        vec![
            ("speech:density".into(), density),
            ("speech:words_per_second".into(), rate),
            ("speech:n_cues".into(), segment.cue_indices.len() as f64),
        ],
    )
}

/// Text of the cues assigned to a segment.
pub fn segment_text(segment: &Segment, t: &Transcript) -> String {
    segment
        .cue_indices
        .iter()
        .filter_map(|i| t.cue(*i))
        .map(|c| c.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Fitted feature extraction: which groups to emit plus the state they need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub groups: Vec<FeatureGroup>,
    pub vocabulary: Option<Vocabulary>,
    pub embeddings: Option<EmbeddingTable>,
}

impl Featurizer {
    /// Fits the vocabulary on training texts when the text group is enabled.
    pub fn fit(
        groups: &[FeatureGroup],
        training_texts: &[&str],
        vocab_cfg: &VocabularyConfig,
        embeddings: Option<EmbeddingTable>,
    ) -> Result<Self> {
        let vocabulary = if groups.contains(&FeatureGroup::Text) {
            Some(fit_vocabulary(training_texts, vocab_cfg)?)
        } else {
            None
        };
        if groups.contains(&FeatureGroup::Embedding) && embeddings.is_none() {
            return Err(Error::Config("feature group `embedding` needs an embedding table".into()));
        }
        let mut groups = groups.to_vec();
        groups.sort();
        groups.dedup();
        Ok(Featurizer { groups, vocabulary, embeddings })
    }

    pub fn featurize(&self, segment: &Segment, t: &Transcript, track: &VideoTrack) -> FeatureVector {
        let id = segment.segment_id.as_str();
        let text = segment_text(segment, t);
        let mut out = FeatureVector::empty(id);
        for g in &self.groups {
            let part = match g {
                FeatureGroup::Text => match &self.vocabulary {
                    Some(v) => text_features(id, &text, v),
                    None => continue,
                },
                FeatureGroup::Embedding => match &self.embeddings {
                    Some(e) => embedding_features(id, &text, e),
                    None => continue,
                },
                FeatureGroup::Video => video_features(segment, track),
                FeatureGroup::Speech => speech_features(segment, t),
            };
            out = out.concat(part);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow<L> {
    pub id: String,
    pub values: Vec<f64>,
    pub label: L,
}

/// Provenance of a synthetic SMOTE row: `base + gap * (neighbor - base)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SmoteOutput<L> {
    /// Originals first, in input order, then the synthetic rows.
    pub rows: Vec<LabeledRow<L>>,
    /// `None` for originals; indices refer to the input rows.
    pub origins: Vec<Option<SyntheticOrigin>>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Grows every class to the majority count with SMOTE interpolation.
///
/// Base rows are taken round-robin within each class; the partner is drawn
/// uniformly among the base's `k_neighbors` nearest same-class rows
/// (Euclidean, ties by input order).
pub fn smote_oversample<L: Ord + Clone + std::fmt::Debug>(
    rows: &[LabeledRow<L>],
    k_neighbors: usize,
    seed: u64,
) -> Result<SmoteOutput<L>> {
    if k_neighbors == 0 {
        return Err(Error::InvalidInput("k_neighbors must be >= 1".into()));
    }
    let mut by_class: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        by_class.entry(r.label.clone()).or_default().push(i);
    }
    let majority = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut out = SmoteOutput { rows: rows.to_vec(), origins: vec![None; rows.len()] };
    let mut rng = crate::rng::seeded(seed);
    for (label, members) in &by_class {
        let need = majority - members.len();
        if need == 0 {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "class {label:?} has a single member; SMOTE needs at least 2 (lower k or drop the class)"
            )));
        }
        let k = k_neighbors.min(members.len() - 1);
        if k < k_neighbors {
            warn!("class {label:?}: k_neighbors lowered to {k}");
        }
        let neighbors: Vec<Vec<usize>> = members
            .iter()
            .map(|&i| {
                let mut others: Vec<usize> = members.iter().copied().filter(|&j| j != i).collect();
                others.sort_by(|&a, &b| {
                    sq_dist(&rows[i].values, &rows[a].values)
                        .total_cmp(&sq_dist(&rows[i].values, &rows[b].values))
                        .then(a.cmp(&b))
                });
                others.truncate(k);
                others
            })
            .collect();
        for s in 0..need {
            let slot = s % members.len();
            let base = members[slot];
            let neighbor = neighbors[slot][rng.gen_range(0..k)];
            let gap: f64 = rng.gen();
            let values = rows[base]
                .values
                .iter()
                .zip(&rows[neighbor].values)
                .map(|(x, n)| x + gap * (n - x))
                .collect();
            out.rows.push(LabeledRow { id: format!("smote:{}:{s}", rows[base].id), values, label: label.clone() });
            out.origins.push(Some(SyntheticOrigin { base, neighbor, gap }));
        }
    }
    Ok(out)
}

/// CSV with a header of feature names; `label` column appended when given.
pub fn feature_matrix_csv(vectors: &[FeatureVector], labels: Option<&[String]>) -> Result<String> {
    let names = vectors.first().map(|v| v.names.clone()).unwrap_or_default();
    let mut out = String::from("segment_id");
    for n in &names {
        if n.contains([',', '"', '\n']) {
            let _ = write!(out, ",\"{}\"", n.replace('"', "\"\""));
        } else {
            let _ = write!(out, ",{n}");
        }
    }
    if labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, v) in vectors.iter().enumerate() {
        if v.names != names {
            return Err(Error::InvalidInput(format!("feature names of `{}` differ from the first row", v.segment_id)));
        }
        out.push_str(&v.segment_id);
        for x in &v.values {
            let _ = write!(out, ",{x}");
        }
        if let Some(l) = labels {
            let _ = write!(out, ",{}", l[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Splits one CSV line honoring double quotes.
fn split_csv_line(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

/// Parses [`feature_matrix_csv`] output back into vectors and optional labels.
pub fn parse_feature_matrix_csv(text: &str) -> Result<(Vec<FeatureVector>, Option<Vec<String>>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Format("empty feature matrix".into()))?;
    let mut cols = split_csv_line(header);
    if cols.first().map(String::as_str) != Some("segment_id") {
        return Err(Error::parse(1, "first column must be segment_id"));
    }
    let has_label = cols.last().map(String::as_str) == Some("label");
    if has_label {
        cols.pop();
    }
    let names: Vec<String> = cols[1..].to_vec();
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines {
        let mut fields = split_csv_line(line);
        if fields.len() != names.len() + 1 + has_label as usize {
            return Err(Error::parse(i + 1, "wrong number of fields"));
        }
        if has_label {
            labels.push(fields.pop().unwrap_or_default());
        }
        let values = fields[1..]
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| Error::parse(i + 1, format!("bad number `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        vectors.push(FeatureVector { segment_id: fields[0].clone(), names: names.clone(), values });
    }
    Ok((vectors, has_label.then_some(labels)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::FrameDescriptor;
    use crate::subtitle::Cue;
    use proptest::prelude::*;

    fn plain_cfg(ngram_max: usize, min_df: u32) -> VocabularyConfig {
        VocabularyConfig { ngram_max, stopwords: BTreeSet::new(), min_df }
    }

    #[test]
    fn vocabulary_document_frequencies() {
        let v = fit_vocabulary(&["bug bug", "lag"], &plain_cfg(1, 1)).unwrap();
        assert_eq!(v.terms, vec!["bug", "lag"]);
        assert_eq!(v.document_frequencies, vec![1, 1]);
        assert_eq!(v.n_documents, 2);
    }

    #[test]
    fn vocabulary_min_df_can_empty_it() {
        let err = fit_vocabulary(&["bug bug", "lag"], &plain_cfg(1, 2)).unwrap_err();
        assert!(err.to_string().contains("no surviving terms"));
    }

    #[test]
    fn vocabulary_bigrams_after_stopwords() {
        let v = fit_vocabulary(&["the game crashed"], &VocabularyConfig { ngram_max: 2, ..Default::default() }).unwrap();
        assert!(v.index_of("game crashed").is_some());
        assert!(v.index_of("the game").is_none());
    }

    #[test]
    fn vocabulary_rejects_empty_documents() {
        assert!(fit_vocabulary(&["", "!!"], &plain_cfg(1, 1)).is_err());
        assert!(fit_vocabulary(&[], &plain_cfg(1, 1)).is_err());
    }

    #[test]
    fn tfidf_empty_and_single() {
        let v = fit_vocabulary(&["bug bug", "lag"], &plain_cfg(1, 1)).unwrap();
        let empty = text_features("s", "", &v);
        assert_eq!(empty.values, vec![0.0, 0.0]);
        let one = text_features("s", "LAG", &v);
        assert_eq!(one.values, vec![0.0, 1.0]);
        assert_eq!(one.names, vec!["text:bug", "text:lag"]);
    }

    #[test]
    fn tfidf_weights() {
        let v = fit_vocabulary(&["bug bug", "lag"], &plain_cfg(1, 1)).unwrap();
        let f = text_features("s", "bug bug lag unknown", &v);
        let w = (3.0f64 / 2.0).ln() + 1.0;
        let (a, b) = (2.0 * w, w);
        let n = (a * a + b * b).sqrt();
        assert!((f.values[0] - a / n).abs() < 1e-12);
        assert!((f.values[1] - b / n).abs() < 1e-12);
    }

    #[test]
    fn transform_does_not_touch_vocabulary() {
        let v = fit_vocabulary(&["bug"], &plain_cfg(1, 1)).unwrap();
        let before = v.clone();
        let _ = text_features("s", "brand new words here", &v);
        assert_eq!(v, before);
    }

    #[test]
    fn embeddings() {
        let table = EmbeddingTable::parse("bug 1 0\nlag 0 3\n").unwrap();
        assert_eq!(embedding_features("s", "nothing known", &table).values, vec![0.0, 0.0]);
        assert_eq!(embedding_features("s", "Bug", &table).values, vec![1.0, 0.0]);
        assert_eq!(embedding_features("s", "bug lag", &table).values, vec![0.5, 1.5]);
        assert!(EmbeddingTable::parse("bug 1 0\nlag 3\n").is_err());
        assert!(EmbeddingTable::parse("").is_err());
    }

    fn solid(ts: u64, bin: usize, lum: f64) -> FrameDescriptor {
        let mut histogram = vec![0.0; 48];
        for c in 0..3 {
            histogram[c * 16 + bin] = 1.0;
        }
        FrameDescriptor { timestamp_ms: ts, histogram, luminance_mean: lum }
    }

    fn seg(start: u64, end: u64, cues: Vec<u32>) -> Segment {
        Segment {
            segment_id: "v/0".into(),
            video_id: "v".into(),
            start_ms: start,
            end_ms: end,
            cue_indices: cues,
            keyframe_timestamps: vec![],
        }
    }

    fn get(f: &FeatureVector, name: &str) -> f64 {
        f.values[f.names.iter().position(|n| n == name).unwrap()]
    }

    #[test]
    fn video_black_and_constant() {
        let track = VideoTrack::new("v", (0..10).map(|i| solid(i * 100, 0, 0.0)).collect(), Some(1000)).unwrap();
        let f = video_features(&seg(0, 1000, vec![]), &track);
        assert_eq!(get(&f, "video:luminance_mean"), 0.0);
        assert_eq!(get(&f, "video:blank_fraction"), 1.0);
        assert_eq!(get(&f, "video:motion_mean"), 0.0);
        assert_eq!(get(&f, "video:motion_std"), 0.0);
        assert_eq!(get(&f, "video:had_video"), 1.0);
        assert_eq!(get(&f, "video:duration_s"), 1.0);
    }

    #[test]
    fn video_alternating_frames() {
        let frames: Vec<_> = (0..8).map(|i| if i % 2 == 0 { solid(i * 100, 0, 0.0) } else { solid(i * 100, 15, 1.0) }).collect();
        // brute-force distance between consecutive frames
        let expected: f64 = frames
            .windows(2)
            .map(|w| (0..48).map(|k| (w[0].histogram[k] - w[1].histogram[k]).abs()).sum::<f64>())
            .sum::<f64>()
            / 7.0;
        let track = VideoTrack::new("v", frames, Some(800)).unwrap();
        let f = video_features(&seg(0, 800, vec![]), &track);
        assert_eq!(expected, 6.0);
        assert_eq!(get(&f, "video:motion_mean"), expected);
        assert_eq!(get(&f, "video:luminance_mean"), 0.5);
    }

    #[test]
    fn video_without_frames() {
        let track = VideoTrack::new("v", vec![solid(5000, 0, 0.0)], Some(6000)).unwrap();
        let f = video_features(&seg(0, 1000, vec![]), &track);
        assert_eq!(get(&f, "video:had_video"), 0.0);
        assert_eq!(get(&f, "video:n_frames"), 0.0);
        assert!(f.is_finite());
    }

    fn transcript(cues: &[(u64, u64, &str)]) -> Transcript {
        let cues = cues
            .iter()
            .enumerate()
            .map(|(i, (s, e, t))| Cue { index: i as u32 + 1, start_ms: *s, end_ms: *e, text: t.to_string() })
            .collect();
        Transcript::new("v", cues).unwrap()
    }

    #[test]
    fn speech_timing() {
        let f = speech_features(&seg(0, 5000, vec![]), &Transcript::default());
        assert_eq!(f.values, vec![0.0, 0.0, 0.0]);
        let t = transcript(&[(0, 5000, "one two three four five six seven eight nine ten")]);
        let f = speech_features(&seg(0, 5000, vec![1]), &t);
        assert_eq!(get(&f, "speech:density"), 1.0);
        assert_eq!(get(&f, "speech:words_per_second"), 2.0);
        assert_eq!(get(&f, "speech:n_cues"), 1.0);
    }

    #[test]
    fn masking_is_idempotent() {
        let a = FeatureVector {
            segment_id: "s".into(),
            names: vec!["text:a".into(), "video:n_frames".into(), "speech:density".into()],
            values: vec![1.0, 2.0, 3.0],
        };
        let m = a.mask(&[FeatureGroup::Video, FeatureGroup::Speech]);
        assert_eq!(m.names, vec!["video:n_frames", "speech:density"]);
        assert_eq!(m.mask(&[FeatureGroup::Video, FeatureGroup::Speech]), m);
        assert_eq!(a.mask(&FeatureGroup::ALL), a);
    }

    fn row(id: &str, values: Vec<f64>, label: u8) -> LabeledRow<u8> {
        LabeledRow { id: id.into(), values, label }
    }

    #[test]
    fn smote_balanced_is_identity() {
        let rows = vec![row("a", vec![0.0], 0), row("b", vec![1.0], 1)];
        let out = smote_oversample(&rows, 3, 7).unwrap();
        assert_eq!(out.rows, rows);
    }

    #[test]
    fn smote_pair_interpolates() {
        let rows = vec![
            row("x", vec![9.0, 9.0], 0),
            row("y", vec![8.0, 9.0], 0),
            row("z", vec![9.0, 8.0], 0),
            row("a", vec![0.0, 0.0], 1),
            row("b", vec![2.0, 4.0], 1),
        ];
        let out = smote_oversample(&rows, 1, 3).unwrap();
        assert_eq!(out.rows.len(), 6);
        let s = &out.rows[5].values;
        // collinear with a and b, between them
        assert!((s[1] - 2.0 * s[0]).abs() < 1e-12);
        assert!((0.0..=2.0).contains(&s[0]));
    }

    #[test]
    fn smote_four_two() {
        let rows = vec![
            row("a", vec![0.0, 0.0], 0),
            row("b", vec![1.0, 0.0], 0),
            row("c", vec![0.0, 1.0], 0),
            row("d", vec![1.0, 1.0], 0),
            row("e", vec![5.0, 5.0], 1),
            row("f", vec![6.0, 7.0], 1),
        ];
        let out = smote_oversample(&rows, 1, 42).unwrap();
        let count = |l| out.rows.iter().filter(|r| r.label == l).count();
        assert_eq!((count(0), count(1)), (4, 4));
        for r in out.rows.iter().skip(6) {
            assert!((5.0..=6.0).contains(&r.values[0]) && (5.0..=7.0).contains(&r.values[1]));
        }
    }

    #[test]
    fn smote_singleton_class_errors() {
        let rows = vec![row("a", vec![0.0], 0), row("b", vec![1.0], 0), row("c", vec![5.0], 1)];
        assert!(smote_oversample(&rows, 1, 0).unwrap_err().to_string().contains("single member"));
    }

    #[test]
    fn matrix_csv_round_trip() {
        let v = FeatureVector { segment_id: "v/1".into(), names: vec!["text:a, b".into(), "video:n".into()], values: vec![0.25, 3.0] };
        let csv = feature_matrix_csv(std::slice::from_ref(&v), Some(&["logic".to_string()])).unwrap();
        let (back, labels) = parse_feature_matrix_csv(&csv).unwrap();
        assert_eq!(back, vec![v]);
        assert_eq!(labels, Some(vec!["logic".to_string()]));
    }

    proptest! {
        #[test]
        fn features_are_finite(text in ".{0,80}", bins in prop::collection::vec(0usize..16, 0..12), start in 0u64..5000, len in 0u64..5000) {
            let vocab = fit_vocabulary(&["bug lag crash", "texture missing"], &plain_cfg(2, 1)).unwrap();
            prop_assert!(text_features("s", &text, &vocab).is_finite());
            let table = EmbeddingTable::parse("bug 1 2\ncrash -1 0.5").unwrap();
            prop_assert!(embedding_features("s", &text, &table).is_finite());
            let frames = bins.iter().enumerate().map(|(i, b)| solid(i as u64 * 500, *b, *b as f64 / 15.0)).collect();
            let track = VideoTrack::new("v", frames, Some(10_000)).unwrap();
            let s = seg(start, start + len, vec![1]);
            prop_assert!(video_features(&s, &track).is_finite());
            let t = transcript(&[(0, 1000, "x y")]);
            prop_assert!(speech_features(&s, &t).is_finite());
        }

        #[test]
        fn smote_equalizes_and_interpolates(
            sizes in prop::collection::vec(2usize..9, 2..4),
            k in 1usize..4,
            seed in any::<u64>(),
        ) {
            let mut rows = Vec::new();
            for (label, &n) in sizes.iter().enumerate() {
                for i in 0..n {
                    let x = (i * 7 % 5) as f64 + label as f64 * 10.0;
                    rows.push(row(&format!("{label}-{i}"), vec![x, (i * 3 % 4) as f64], label as u8));
                }
            }
            let out = smote_oversample(&rows, k, seed).unwrap();
            let max = *sizes.iter().max().unwrap();
            for label in 0..sizes.len() {
                prop_assert_eq!(out.rows.iter().filter(|r| r.label == label as u8).count(), max);
            }
            prop_assert_eq!(&out.rows[..rows.len()], rows.as_slice());
            for (r, o) in out.rows.iter().zip(&out.origins) {
                if let Some(o) = o {
                    let (a, b) = (&rows[o.base], &rows[o.neighbor]);
                    prop_assert_eq!(a.label, r.label);
                    prop_assert_eq!(b.label, r.label);
                    prop_assert!((0.0..1.0).contains(&o.gap));
                    for d in 0..2 {
                        prop_assert!((r.values[d] - (a.values[d] + o.gap * (b.values[d] - a.values[d]))).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
