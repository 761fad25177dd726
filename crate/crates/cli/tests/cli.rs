use std::path::Path;
use std::process::{Command, Output};

use gelid_core::synthetic::{demo_videos, write_dataset};

fn gelid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gelid")).args(args).env_remove("RUST_LOG").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gelid(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

fn dataset(dir: &Path) -> String {
    write_dataset(dir, &demo_videos(7), true, 7).unwrap().display().to_string()
}

const FAST: &str = "run.seed = 7\nmodel.trees = 10\n";

#[test]
fn stages_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(&dir.path().join("data"));
    let cfg = dir.path().join("gelid.conf");
    std::fs::write(&cfg, FAST).unwrap();
    let out = dir.path().join("out");
    let base = |sub: &str| -> Vec<String> {
        vec![sub.into(), "--manifest".into(), manifest.clone(), "--config".into(), cfg.display().to_string(), "--out".into(), out.display().to_string()]
    };
    for stage in ["ingest", "segment", "features", "train"] {
        let args = base(stage);
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    }
    for f in ["manifest.json", "video1.srt", "video1.csv", "segments.jsonl", "features.csv", "featurizer.json", "model.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(out.join("segments.jsonl")).unwrap().lines().count(), 30);
    assert!(std::fs::read_to_string(out.join("features.csv")).unwrap().lines().next().unwrap().ends_with(",label"));

    // the ingested manifest feeds later stages just like the original
    let model = out.join("model.json").display().to_string();
    let ingested = out.join("manifest.json").display().to_string();
    let out2 = dir.path().join("out2").display().to_string();
    for stage in ["classify", "group", "cluster"] {
        ok(&[stage, "--manifest", &ingested, "--model", &model, "--config", &cfg.display().to_string(), "--out", &out2]);
    }
    let preds = std::fs::read_to_string(Path::new(&out2).join("predictions.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), 30);
    let contexts = json(&std::fs::read_to_string(Path::new(&out2).join("contexts.json")).unwrap());
    assert_eq!(contexts["algorithm"], "dbscan");
    assert!(Path::new(&out2).join("hierarchy.json").exists());
}

#[test]
fn run_twice_is_byte_identical_and_report_renders() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(&dir.path().join("data"));
    let cfg = dir.path().join("gelid.conf");
    std::fs::write(&cfg, FAST).unwrap();
    let mut hierarchies = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&["run", "--manifest", &manifest, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        hierarchies.push(std::fs::read(out.join("hierarchy.json")).unwrap());
        for f in ["run_report.json", "report.html", "predictions.jsonl", "model.json"] {
            assert!(out.join(f).exists(), "{f}");
        }
    }
    assert_eq!(hierarchies[0], hierarchies[1]);
    let h = dir.path().join("a/hierarchy.json");
    let html = ok(&["report", "--hierarchy", h.to_str().unwrap(), "--format", "html"]);
    let n_contexts = json(std::str::from_utf8(&hierarchies[0]).unwrap())["contexts"].as_array().unwrap().len();
    assert_eq!(html.matches("<section class=\"context\"").count(), n_contexts);
    let again = ok(&["report", "--hierarchy", h.to_str().unwrap(), "--format", "json"]);
    assert_eq!(again.as_bytes(), &hierarchies[0][..]);
}

#[test]
fn seed_flag_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(&["eval", "likert", "--sims", "50", "--group-size", "20", "--seed", "1"]);
    let b = ok(&["eval", "likert", "--sims", "50", "--group-size", "20", "--seed", "2"]);
    assert_ne!(json(&a)["std"], json(&b)["std"]);
    let out = Command::new(env!("CARGO_BIN_EXE_gelid"))
        .args(["eval", "likert", "--sims", "50", "--group-size", "20"])
        .env("GELID_RUN_SEED", "1")
        .output()
        .unwrap();
    assert_eq!(json(std::str::from_utf8(&out.stdout).unwrap())["std"], json(&a)["std"]);
    let _ = dir;
}

#[test]
fn eval_statistics() {
    let m = json(&ok(&["eval", "margin", "--n", "1000", "--confidence", "0.95"]));
    assert!((m["margin_of_error"].as_f64().unwrap() - 0.031).abs() < 0.0005);
    let mw = json(&ok(&["eval", "mann-whitney", "--x", "1,2", "--y", "3,4", "--oracle"]));
    assert_eq!(mw["mann_whitney"]["u"], 0.0);
    assert!((mw["oracle_p_two_sided"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    let bh = json(&ok(&["eval", "bh", "--p", "0.01,0.02,0.03,0.04"]));
    assert_eq!(bh["adjusted"], serde_json::json!([0.04, 0.04, 0.04, 0.04]));
    assert_eq!(json(&ok(&["eval", "atomicity", "--extra", "7"]))["score"], 1);
    let p = json(&ok(&["eval", "power", "--sd", "2.0", "--sims", "2000", "--seed", "3"]));
    assert!((p["estimate"]["power"].as_f64().unwrap() - 0.71).abs() < 0.04);

    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    std::fs::write(&a, r#"[["1","2"],["3"]]"#).unwrap();
    std::fs::write(&b, r#"[["1","2","3"]]"#).unwrap();
    let mojo = json(&ok(&["eval", "mojo", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap(), "--oracle"]));
    assert_eq!(mojo["mno"], 1);
    assert_eq!(mojo["oracle_mno"], 1);
    std::fs::write(&a, r#"["x","y","x","y"]"#).unwrap();
    std::fs::write(&b, r#"["y","x","y","x"]"#).unwrap();
    let k = json(&ok(&["eval", "kappa", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()]));
    assert_eq!(k["kappa"], -1.0);
    let r = dir.path().join("r.json");
    std::fs::write(&r, r#"{"k0": [1,2,2,3,1], "k5": [4,5,4,5,3], "k10": [3,3,4,2,2]}"#).unwrap();
    let cmp = json(&ok(&["eval", "ratings", "--file", r.to_str().unwrap()]));
    assert_eq!(cmp["comparisons"].as_array().unwrap().len(), 3);
}

#[test]
fn eval_models_compares_nine_configurations() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let cfg = dir.path().join("gelid.conf");
    std::fs::write(&cfg, "run.seed = 7\nmodel.trees = 10\nmodel.epochs = 20\nsplit.folds = 3\n").unwrap();
    let v = json(&ok(&["eval", "models", "--manifest", &manifest, "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["results"].as_array().unwrap().len(), 9);
    assert_eq!(v["evaluation_size"].as_u64().unwrap() + v["test_size"].as_u64().unwrap(), 30);
}

#[test]
fn exit_codes() {
    assert_eq!(gelid(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gelid(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "run.seed = 1\nsegmenter.alpah = 2\n").unwrap();
    assert_eq!(gelid(&["eval", "margin", "--n", "10", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    let broken = dir.path().join("m.json");
    std::fs::write(&broken, "{not json").unwrap();
    let out = gelid(&["segment", "--manifest", broken.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let bad_srt = dir.path().join("data");
    let manifest = dataset(&bad_srt);
    std::fs::write(bad_srt.join("video2.srt"), "1\n00:00:05,000 --> 00:00:01,000\nbackwards\n").unwrap();
    let out = gelid(&["run", "--manifest", &manifest, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ingest") && err.contains("video2") && err.contains("line 2"), "{err}");
    assert!(!dir.path().join("o/hierarchy.json").exists());
}

#[test]
fn demo_dataset_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let manifest = ok(&["demo", "--out", data.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(manifest.trim(), data.join("manifest.json").to_str().unwrap());
    let out = dir.path().join("out");
    ok(&["run", "--manifest", manifest.trim(), "--out", out.to_str().unwrap(), "--seed", "5"]);
    let report = json(&std::fs::read_to_string(out.join("run_report.json")).unwrap());
    assert_eq!(report["segments_total"], 30);
}
