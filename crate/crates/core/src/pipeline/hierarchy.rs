//! The three-level issue hierarchy (context → category → cluster) and its
//! JSON/HTML renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::models::IssueLabel;
use crate::segmentation::Segment;
use crate::{Millis, Result};

pub const HIERARCHY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentRef {
    pub segment_id: String,
    pub video_id: String,
    pub start_ms: Millis,
    pub end_ms: Millis,
}

impl From<&Segment> for SegmentRef {
    fn from(s: &Segment) -> Self {
        SegmentRef { segment_id: s.segment_id.clone(), video_id: s.video_id.clone(), start_ms: s.start_ms, end_ms: s.end_ms }
    }
}

/// Counts shown for every node.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_segments: usize,
    pub total_duration_ms: Millis,
    pub n_videos: usize,
    pub label_counts: BTreeMap<String, usize>,
}

impl Summary {
    pub fn of<'a>(members: impl IntoIterator<Item = (&'a SegmentRef, IssueLabel)>) -> Self {
        let mut s = Summary::default();
        let mut videos = std::collections::BTreeSet::new();
        for (m, label) in members {
            s.n_segments += 1;
            s.total_duration_ms += m.end_ms - m.start_ms;
            videos.insert(m.video_id.clone());
            *s.label_counts.entry(label.as_str().to_string()).or_default() += 1;
        }
        s.n_videos = videos.len();
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueCluster {
    pub cluster_id: String,
    pub medoid: String,
    /// Medoid first, then by segment id.
    pub members: Vec<SegmentRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryNode {
    pub label: IssueLabel,
    pub summary: Summary,
    pub clusters: Vec<IssueCluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextNode {
    pub context_id: String,
    pub summary: Summary,
    pub categories: Vec<CategoryNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueHierarchy {
    pub schema_version: u32,
    pub contexts: Vec<ContextNode>,
}

impl Default for IssueHierarchy {
    fn default() -> Self {
        IssueHierarchy { schema_version: HIERARCHY_SCHEMA_VERSION, contexts: Vec::new() }
    }
}

impl IssueHierarchy {
    /// Every segment placed in the hierarchy, in traversal order.
    pub fn segment_ids(&self) -> Vec<&str> {
        self.contexts
            .iter()
            .flat_map(|c| &c.categories)
            .flat_map(|k| &k.clusters)
            .flat_map(|c| &c.members)
            .map(|m| m.segment_id.as_str())
            .collect()
    }

    pub fn n_members(&self) -> usize {
        self.segment_ids().len()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        crate::models::check_schema_version(&v, HIERARCHY_SCHEMA_VERSION)?;
        Ok(serde_json::from_value(v)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Html,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "html" => Ok(ReportFormat::Html),
            other => Err(crate::Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

/// Pretty JSON with keys sorted at every level, newline-terminated.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // `Value` maps are ordered by key
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// `h:mm:ss.mmm` for a millisecond offset.
pub fn clock(ms: Millis) -> String {
    format!("{}:{:02}:{:02}.{:03}", ms / 3_600_000, ms / 60_000 % 60, ms / 1000 % 60, ms % 1000)
}

fn summary_line(s: &Summary) -> String {
    let labels: Vec<String> = s.label_counts.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    format!(
        "{} segments from {} video(s), {} total; {}",
        s.n_segments,
        s.n_videos,
        clock(s.total_duration_ms),
        labels.join(", ")
    )
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em;max-width:60em}\
section.context{border-top:2px solid #444;margin-top:1.5em}\
.summary{color:#555}li.medoid{font-weight:bold}";

/// One static page: contexts, their categories, clusters and segment ranges.
pub fn render_html(h: &IssueHierarchy) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    out.push_str("<title>Issue report</title>\n");
    let _ = writeln!(out, "<style>{STYLE}</style>\n</head>\n<body>\n<h1>Issue report</h1>");
    let _ = writeln!(out, "<p class=\"summary\">{} context(s), {} segment(s)</p>", h.contexts.len(), h.n_members());
    for ctx in &h.contexts {
        let _ = writeln!(out, "<section class=\"context\" id=\"{}\">", escape(&ctx.context_id));
        let _ = writeln!(out, "<h2>{}</h2>", escape(&ctx.context_id));
        let _ = writeln!(out, "<p class=\"summary\">{}</p>", escape(&summary_line(&ctx.summary)));
        for cat in &ctx.categories {
            let _ = writeln!(out, "<div class=\"category\">\n<h3>{}</h3>", cat.label.as_str());
            let _ = writeln!(out, "<p class=\"summary\">{}</p>", escape(&summary_line(&cat.summary)));
            for cl in &cat.clusters {
                let _ = writeln!(out, "<h4>{}</h4>\n<ol>", escape(&cl.cluster_id));
                for m in &cl.members {
                    let class = if m.segment_id == cl.medoid { " class=\"medoid\"" } else { "" };
                    let _ = writeln!(
                        out,
                        "<li{class}>{} {}&ndash;{}</li>",
                        escape(&m.video_id),
                        clock(m.start_ms),
                        clock(m.end_ms)
                    );
                }
                out.push_str("</ol>\n");
            }
            out.push_str("</div>\n");
        }
        out.push_str("</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}

pub fn export_report(h: &IssueHierarchy, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => canonical_json(h),
        ReportFormat::Html => Ok(render_html(h)),
    }
}

/// Writes the report to `path`, creating parent directories.
pub fn write_report(h: &IssueHierarchy, format: ReportFormat, path: &std::path::Path) -> Result<()> {
    let text = export_report(h, format)?;
    super::write_file(path, &text)
}
