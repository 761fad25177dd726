use gelid_core::models::IssueLabel;
use gelid_core::pipeline::{
    canonical_json, export_report, prepare_videos, run_pipeline, train_classifier, Manifest, ReportFormat, RunConfig,
};
use gelid_core::synthetic::{demo_video, demo_videos, write_dataset, Scene, SyntheticVideo};
use gelid_core::Error;

fn config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.hyper.trees = 20;
    cfg
}

#[test]
fn segments_follow_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = Manifest::load(&write_dataset(dir.path(), &demo_videos(1), true, 1).unwrap()).unwrap();
    let videos = prepare_videos(&manifest, &config()).unwrap();
    for v in &videos {
        assert_eq!(v.segments.len(), 10, "{}", v.entry.video_id);
        let starts: Vec<u64> = v.segments.iter().map(|s| s.start_ms).collect();
        let expected: Vec<u64> = std::iter::once(0).chain((1..10).map(|i| i * 15_000 + 5000)).collect();
        assert_eq!(starts, expected);
        assert!(v.segments.iter().all(|s| s.cue_indices.len() == 1));
    }
}

#[test]
fn run_is_deterministic_and_conserves_segments() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = Manifest::load(&write_dataset(dir.path(), &demo_videos(3), true, 3).unwrap()).unwrap();
    let a = run_pipeline(&manifest, &config(), None).unwrap();
    let b = run_pipeline(&manifest, &config(), None).unwrap();
    assert_eq!(canonical_json(&a.hierarchy).unwrap(), canonical_json(&b.hierarchy).unwrap());
    assert_eq!(a.report.informative, a.hierarchy.n_members());
    assert_eq!(a.report.segments_total, a.report.informative + a.report.non_informative);
    assert_eq!(a.report.segments_total, 30);
    assert!(a.report.informative > 0);
    let mut ids = a.hierarchy.segment_ids();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), a.report.informative);

    let mut single = config();
    single.workers = 1;
    let c = run_pipeline(&manifest, &single, None).unwrap();
    assert_eq!(canonical_json(&a.hierarchy).unwrap(), canonical_json(&c.hierarchy).unwrap());
}

#[test]
fn all_non_informative_video_gives_empty_hierarchy() {
    let dir = tempfile::tempdir().unwrap();
    let train_manifest = Manifest::load(&write_dataset(&dir.path().join("train"), &demo_videos(5), true, 5).unwrap()).unwrap();
    let classifier = train_classifier(&prepare_videos(&train_manifest, &config()).unwrap(), &config()).unwrap();
    let chatter = SyntheticVideo {
        video_id: "chat".into(),
        scenes: (0..4)
            .map(|i| Scene {
                color: gelid_core::synthetic::palette(0),
                millis: 15_000,
                label: IssueLabel::NonInformative,
                line: ["Hey everyone welcome back to the stream.", "Thanks for the follow, really appreciate it."][i % 2]
                    .into(),
            })
            .collect(),
    };
    let m = Manifest::load(&write_dataset(&dir.path().join("chat"), &[chatter], false, 5).unwrap()).unwrap();
    let out = run_pipeline(&m, &config(), Some(&classifier)).unwrap();
    assert!(out.report.all_discarded);
    assert!(out.hierarchy.contexts.is_empty());
    assert!(export_report(&out.hierarchy, ReportFormat::Json).unwrap().contains("\"contexts\": []"));
}

#[test]
fn duplicate_videos_pair_up() {
    let dir = tempfile::tempdir().unwrap();
    let mut twin = demo_video("a", 6, 1, 9);
    let mut other = twin.clone();
    other.video_id = "b".into();
    twin.video_id = "a".into();
    let m = Manifest::load(&write_dataset(dir.path(), &[twin, other], true, 9).unwrap()).unwrap();
    let out = run_pipeline(&m, &config(), None).unwrap();
    let videos = prepare_videos(&m, &config()).unwrap();
    let starts = |i: usize| videos[i].segments.iter().map(|s| (s.start_ms, s.end_ms)).collect::<Vec<_>>();
    assert_eq!(starts(0), starts(1));
    for cluster in out.hierarchy.contexts.iter().flat_map(|c| &c.categories).flat_map(|k| &k.clusters) {
        let count = |v: &str| cluster.members.iter().filter(|m| m.video_id == v).count();
        assert_eq!(count("a"), count("b"), "{}", cluster.cluster_id);
    }
}

#[test]
fn missing_file_names_stage_and_video() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_dataset(dir.path(), &demo_videos(1)[..1], true, 1).unwrap();
    std::fs::remove_file(dir.path().join("video1.csv")).unwrap();
    let err = run_pipeline(&Manifest::load(&path).unwrap(), &config(), None).unwrap_err();
    match &err {
        Error::Stage { stage, video_id, .. } => assert_eq!((stage.as_str(), video_id.as_str()), ("ingest", "video1")),
        other => panic!("unexpected {other}"),
    }
    assert_eq!(err.exit_code(), 2);
}
