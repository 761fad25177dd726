//! WebAssembly entry points for the static demo page.
//!
//! Each operation takes a JSON request string and returns a JSON response
//! string, so the page needs no generated bindings beyond three functions.
//! The plain `*_json` functions hold the logic and are tested natively.

use gelid_core::clustering::{group_by_context, ClusterAlgorithm, ClusterAssignment};
use gelid_core::evalstats::{
    margin_of_error, mojo_fm, simulate_likert_std, simulate_power, LikertGenerator, Partition, PowerTest,
};
use gelid_core::segmentation::{derive_cut_points, SegmenterConfig, ShotTransition};
use gelid_core::subtitle::{parse_srt, sentence_spans};
use gelid_core::synthetic::planted_contexts;
use gelid_core::Millis;
use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn parse<'a, T: Deserialize<'a>>(request: &'a str) -> Result<T, String> {
    serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CutRequest {
    srt: String,
    shots_ms: Vec<Millis>,
    #[serde(default = "default_k")]
    k_seconds: u32,
    #[serde(default = "default_silence")]
    silence_ms: Millis,
    #[serde(default = "default_gap")]
    gap_ms: Millis,
}

fn default_k() -> u32 {
    SegmenterConfig::default().k_seconds
}

fn default_silence() -> Millis {
    SegmenterConfig::default().silence_ms
}

fn default_gap() -> Millis {
    SegmenterConfig::default().gap_ms
}

/// Sentences of an SRT transcript and where each shot's cut lands.
pub fn explore_cuts_json(request: &str) -> Result<String, String> {
    let req: CutRequest = parse(request)?;
    let t = parse_srt(req.srt.as_bytes()).map_err(|e| e.to_string())?;
    let cfg = SegmenterConfig {
        k_seconds: req.k_seconds,
        silence_ms: req.silence_ms,
        gap_ms: req.gap_ms,
        ..Default::default()
    };
    let shots: Vec<ShotTransition> =
        req.shots_ms.iter().map(|&timestamp_ms| ShotTransition { timestamp_ms, score: 1.0 }).collect();
    let out = json!({
        "sentences": sentence_spans(&t, cfg.gap_ms),
        "cuts": derive_cut_points(&shots, &t, &cfg),
    });
    Ok(out.to_string())
}

// `flatten` rules out `deny_unknown_fields` here
#[derive(Deserialize)]
struct ClusterRequest {
    scenes: usize,
    per_scene: usize,
    /// Largest fraction of random pixels per keyframe.
    noise: f64,
    seed: u64,
    #[serde(flatten)]
    algorithm: ClusterAlgorithm,
}

fn cluster_summary(a: &ClusterAssignment) -> Value {
    json!({
        "clusters": a.clusters.iter().map(|c| json!({"medoid": c.medoid, "members": c.member_segment_ids})).collect::<Vec<_>>(),
        "noise": a.noise,
    })
}

/// Clusters planted synthetic scenes and scores the result against the truth.
pub fn cluster_planted_json(request: &str) -> Result<String, String> {
    let req: ClusterRequest = parse(request)?;
    if req.scenes * req.per_scene > 400 {
        return Err("at most 400 segments in the demo".into());
    }
    let (items, truth) = planted_contexts(req.scenes, req.per_scene, req.noise, req.seed).map_err(|e| e.to_string())?;
    let got = group_by_context(&items, &req.algorithm).map_err(|e| e.to_string())?;
    let expected = Partition::from_labels(items.iter().zip(&truth).map(|(i, &t)| (i.segment_id.clone(), t)))
        .map_err(|e| e.to_string())?;
    let found = got.to_partition().map_err(|e| e.to_string())?;
    // undefined when the reference cannot be improved upon (e.g. one scene)
    let score = mojo_fm(&found, &expected).ok();
    let mut out = cluster_summary(&got);
    out["algorithm"] = json!(got.algorithm);
    out["params"] = json!(got.params);
    out["truth"] = json!(items.iter().zip(&truth).map(|(i, t)| (i.segment_id.clone(), t)).collect::<Vec<_>>());
    out["mojo_fm"] = json!(score);
    Ok(out.to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerRequest {
    group_size: usize,
    shift: f64,
    sd: f64,
    alpha: f64,
    n_sims: usize,
    seed: u64,
    #[serde(default = "default_test")]
    test: PowerTest,
}

fn default_test() -> PowerTest {
    PowerTest::TTest
}

/// Power of the planned comparison, the standard deviations uniform Likert
/// groups of that size produce, and the survey margin of error for `n_sims`
/// respondents-equivalent groups.
pub fn simulate_power_json(request: &str) -> Result<String, String> {
    let req: PowerRequest = parse(request)?;
    if req.n_sims > 20_000 || req.group_size > 5_000 {
        return Err("at most 20000 simulations of groups up to 5000 in the demo".into());
    }
    let power = simulate_power(req.group_size, req.shift, req.sd, req.alpha, req.n_sims, req.seed, req.test)
        .map_err(|e| e.to_string())?;
    let likert = simulate_likert_std(1000, req.group_size, LikertGenerator::Uniform, req.seed).map_err(|e| e.to_string())?;
    let margin = margin_of_error(req.group_size as u64, 1.0 - req.alpha).map_err(|e| e.to_string())?;
    Ok(json!({ "power": power, "likert_std": likert, "margin_of_error": margin }).to_string())
}

#[wasm_bindgen(js_name = exploreCuts)]
pub fn explore_cuts(request: &str) -> Result<String, JsValue> {
    explore_cuts_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = clusterPlanted)]
pub fn cluster_planted(request: &str) -> Result<String, JsValue> {
    cluster_planted_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = simulatePower)]
pub fn simulate_power_js(request: &str) -> Result<String, JsValue> {
    simulate_power_json(request).map_err(|e| JsValue::from_str(&e))
}
