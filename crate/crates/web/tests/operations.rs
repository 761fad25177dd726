use gelid_web::{cluster_planted_json, explore_cuts_json, simulate_power_json};
use serde_json::Value;

fn call(f: fn(&str) -> Result<String, String>, request: &str) -> Value {
    serde_json::from_str(&f(request).unwrap()).unwrap()
}

#[test]
fn cut_lands_at_sentence_end() {
    let srt = "1\n00:13:48,000 --> 00:13:56,000\noh no the whole\n\n2\n00:13:56,000 --> 00:14:05,000\nthing just froze.\n";
    let req = serde_json::json!({ "srt": srt, "shots_ms": [825000] }).to_string();
    let v = call(explore_cuts_json, &req);
    assert_eq!(v["sentences"].as_array().unwrap().len(), 1);
    assert_eq!(v["cuts"][0]["cut_ms"], 845_000);
    assert_eq!(v["cuts"][0]["snap_rule"], "sentence_end");
}

#[test]
fn planted_scenes_cluster_cleanly() {
    for algorithm in ["dbscan", "optics", "mean_shift"] {
        let defaults = match algorithm {
            "dbscan" => r#""eps": 0.3, "min_pts": 2"#,
            "optics" => r#""min_pts": 2, "eps_max": 1.0, "eps_cut": 0.3"#,
            _ => r#""bandwidth": 0.3, "tol": 1e-9, "max_iter": 300"#,
        };
        let req = format!(r#"{{"scenes": 3, "per_scene": 8, "noise": 0.2, "seed": 1, "algorithm": "{algorithm}", {defaults}}}"#);
        let v = call(cluster_planted_json, &req);
        assert_eq!(v["mojo_fm"], 100.0, "{algorithm}");
        assert_eq!(v["clusters"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn power_matches_planning_numbers() {
    let req = r#"{"group_size": 200, "shift": 0.5, "sd": 2.0, "alpha": 0.05, "n_sims": 4000, "seed": 3}"#;
    let v = call(simulate_power_json, req);
    assert!((v["power"]["power"].as_f64().unwrap() - 0.71).abs() < 0.04);
    assert!((v["likert_std"]["mean"].as_f64().unwrap() - 2f64.sqrt()).abs() < 0.02);
}

#[test]
fn bad_requests_are_reported() {
    assert!(explore_cuts_json("{}").unwrap_err().starts_with("bad request"));
    assert!(explore_cuts_json(r#"{"srt": "1\n00:00:05,000 --> 00:00:01,000\nx\n", "shots_ms": []}"#).is_err());
    let too_big = r#"{"scenes": 30, "per_scene": 30, "noise": 0.1, "seed": 1, "algorithm": "dbscan", "eps": 0.3, "min_pts": 2}"#;
    assert!(cluster_planted_json(too_big).is_err());
    assert!(simulate_power_json(r#"{"group_size": 10, "shift": 0.5, "sd": -1, "alpha": 0.05, "n_sims": 10, "seed": 1}"#).is_err());
}
