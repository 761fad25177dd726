//! `gelid`: command-line front end for the issue-mining pipeline.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or format
//! error, 3 internal invariant violation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gelid_core::clustering::{group_by_context, ContextItem};
use gelid_core::evalstats::{self, LikertGenerator, Partition, PowerTest, RatingSample};
use gelid_core::features::{feature_matrix_csv, segment_text, Featurizer};
use gelid_core::frames::write_descriptor_csv;
use gelid_core::pipeline::{
    canonical_json, classify_videos, compare_models, export_report, prepare_videos, run_pipeline, train_classifier,
    write_file, Classifier, IssueHierarchy, LabelSpan, Manifest, ReportFormat, RunConfig, VideoData, VideoEntry,
};
use gelid_core::segmentation::segments_to_jsonl;
use gelid_core::synthetic::{demo_videos, write_dataset};
use gelid_core::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "gelid", version, about = "Segment, classify and cluster gameplay videos into an issue report")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trained classifier (as written by `train`).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse subtitles and frames; write canonical SRT, descriptor CSV and a manifest.
    Ingest,
    /// Cut every video into segments (`segments.jsonl`).
    Segment,
    /// Extract the feature matrix (`features.csv`, `featurizer.json`).
    Features,
    /// Train the configured classifier on the manifest's labels (`model.json`).
    Train,
    /// Label every segment (`predictions.jsonl`).
    Classify,
    /// Group informative segments by visual context (`contexts.json`).
    Group,
    /// Cluster issues within contexts (`hierarchy.json`).
    Cluster,
    /// Run every stage and write the hierarchy, run report and HTML page.
    Run,
    /// Evaluation statistics.
    Eval {
        /// Cross-check against the brute-force oracles (test builds only).
        #[arg(long, global = true)]
        oracle: bool,
        #[command(subcommand)]
        what: EvalCommand,
    },
    /// Write a synthetic three-video dataset with label files into `--out`.
    Demo,
    /// Render a hierarchy as JSON or HTML.
    Report {
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long, value_enum, default_value = "html")]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Html,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    T,
    MannWhitney,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Worst-case margin of error of a sampled proportion.
    Margin {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
    },
    /// Standard deviations of simulated Likert groups.
    Likert {
        #[arg(long, default_value_t = 1000)]
        sims: usize,
        #[arg(long, default_value_t = 200)]
        group_size: usize,
        /// `uniform`, `bimodal` or `constant:<1-5>`.
        #[arg(long, default_value = "uniform")]
        generator: String,
    },
    /// Monte-Carlo power of a two-sample test.
    Power {
        #[arg(long, default_value_t = 200)]
        group_size: usize,
        #[arg(long, default_value_t = 0.5)]
        shift: f64,
        #[arg(long)]
        sd: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        sims: usize,
        #[arg(long, value_enum, default_value = "t")]
        test: TestKind,
    },
    /// MoJo distance and MoJoFM between two partitions.
    Mojo {
        /// Partition file: a list of groups, or a cluster assignment.
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Cohen's kappa between two JSON label arrays.
    Kappa {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Mann-Whitney U test and Cliff's delta on comma-separated samples.
    MannWhitney {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Vec<f64>,
    },
    /// Benjamini-Hochberg adjusted p-values.
    Bh {
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
    },
    /// Pairwise comparison of named Likert rating groups (JSON object of arrays).
    Ratings {
        #[arg(long)]
        file: PathBuf,
    },
    /// Annotation score for a segment with `extra` further standalone segments.
    Atomicity {
        #[arg(long)]
        extra: u32,
    },
    /// Compare the nine model and feature-set configurations.
    Models,
}

struct Ctx {
    cfg: RunConfig,
    global: Global,
}

impl Ctx {
    fn manifest(&self) -> Result<Manifest> {
        let path = self.global.manifest.as_deref().ok_or_else(|| Error::Config("--manifest is required".into()))?;
        Manifest::load(path)
    }

    fn out_dir(&self) -> Result<&Path> {
        self.global.out.as_deref().ok_or_else(|| Error::Config("--out is required".into()))
    }

    fn videos(&self) -> Result<Vec<VideoData>> {
        let m = self.manifest()?;
        m.check_paths()?;
        prepare_videos(&m, &self.cfg)
    }

    /// The `--model` classifier, or one trained on the manifest's labels.
    fn classifier(&self, videos: &[VideoData]) -> Result<Classifier> {
        match &self.global.model {
            Some(p) => Classifier::load(p),
            None => train_classifier(videos, &self.cfg),
        }
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.out_dir()?.join(name);
        write_file(&path, text)?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// Eval results go to `<out>/<name>.json` when `--out` is given, else stdout.
    fn emit(&self, name: &str, value: &serde_json::Value) -> Result<()> {
        let text = canonical_json(value)?;
        match &self.global.out {
            Some(_) => self.write(&format!("{name}.json"), &text).map(|_| ()),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn load_config(global: &Global) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env(std::env::vars())?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn jsonl<T: serde::Serialize>(rows: &[T]) -> Result<String> {
    rows.iter().map(|r| Ok(serde_json::to_string(r)? + "\n")).collect()
}

/// Reads a partition: `[["a","b"],["c"]]` or a cluster assignment, whose
/// noise items become singletons.
fn load_partition(path: &Path) -> Result<Partition> {
    let v: serde_json::Value = serde_json::from_str(&read(path)?)?;
    if v.get("clusters").is_some() {
        let a: gelid_core::clustering::ClusterAssignment = serde_json::from_value(v)?;
        return a.to_partition();
    }
    let groups: Vec<Vec<serde_json::Value>> = serde_json::from_value(v)?;
    let groups: Vec<Vec<String>> =
        groups.into_iter().map(|g| g.into_iter().map(|x| x.as_str().map_or(x.to_string(), String::from)).collect()).collect();
    Partition::from_groups(&groups)
}

fn load_labels(path: &Path) -> Result<Vec<String>> {
    let v: Vec<serde_json::Value> = serde_json::from_str(&read(path)?)?;
    Ok(v.into_iter().map(|x| x.as_str().map_or(x.to_string(), String::from)).collect())
}

fn ingest(ctx: &Ctx) -> Result<()> {
    let videos = ctx.videos()?;
    let mut entries = Vec::new();
    for v in &videos {
        let id = &v.entry.video_id;
        ctx.write(&format!("{id}.srt"), &v.transcript.to_srt())?;
        ctx.write(&format!("{id}.csv"), &write_descriptor_csv(&v.track))?;
        let labels = match &v.label_spans {
            Some(spans) => {
                ctx.write(&format!("{id}.labels.jsonl"), &jsonl::<LabelSpan>(spans)?)?;
                Some(format!("{id}.labels.jsonl").into())
            }
            None => None,
        };
        entries.push(VideoEntry {
            video_id: id.clone(),
            subtitles: format!("{id}.srt").into(),
            frames: format!("{id}.csv").into(),
            duration_ms: Some(v.track.duration_ms),
            labels,
        });
    }
    ctx.write("manifest.json", &Manifest::new(entries)?.to_json()?)?;
    println!("ingested {} video(s)", videos.len());
    Ok(())
}

fn segment(ctx: &Ctx) -> Result<()> {
    let videos = ctx.videos()?;
    let all: Vec<_> = videos.iter().flat_map(|v| v.segments.iter().cloned()).collect();
    ctx.write("segments.jsonl", &segments_to_jsonl(&all)?)?;
    println!("{} segment(s) from {} video(s)", all.len(), videos.len());
    Ok(())
}

fn features(ctx: &Ctx) -> Result<()> {
    let videos = ctx.videos()?;
    let featurizer = match &ctx.global.model {
        Some(p) => Classifier::load(p)?.featurizer,
        None => {
            let texts: Vec<String> =
                videos.iter().flat_map(|v| v.segments.iter().map(|s| segment_text(s, &v.transcript))).collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let embeddings = match &ctx.cfg.embeddings {
                Some(p) => Some(gelid_core::features::EmbeddingTable::parse(&read(p)?)?),
                None => None,
            };
            Featurizer::fit(&ctx.cfg.feature_groups, &refs, &ctx.cfg.vocabulary_config(), embeddings)?
        }
    };
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for v in &videos {
        for s in &v.segments {
            vectors.push(featurizer.featurize(s, &v.transcript, &v.track));
            labels.push(v.label_spans.as_ref().map(|spans| gelid_core::pipeline::label_for_segment(s, spans)));
        }
    }
    let labels: Option<Vec<String>> = labels.into_iter().map(|l| l.map(|l| l.as_str().to_string())).collect();
    ctx.write("features.csv", &feature_matrix_csv(&vectors, labels.as_deref())?)?;
    ctx.write("featurizer.json", &(serde_json::to_string_pretty(&featurizer)? + "\n"))?;
    println!("{} row(s) × {} feature(s)", vectors.len(), vectors.first().map_or(0, |v| v.len()));
    Ok(())
}

fn train(ctx: &Ctx) -> Result<()> {
    let videos = ctx.videos()?;
    let clf = train_classifier(&videos, &ctx.cfg)?;
    ctx.write("model.json", &clf.to_json()?)?;
    println!("trained {} on {} feature(s)", clf.model.kind.as_str(), clf.model.feature_names.len());
    Ok(())
}

fn classify(ctx: &Ctx) -> Result<()> {
    let videos = ctx.videos()?;
    let predictions = classify_videos(&ctx.classifier(&videos)?, &videos)?;
    ctx.write("predictions.jsonl", &jsonl(&predictions)?)?;
    let informative = predictions.iter().filter(|p| p.label.is_informative()).count();
    println!("{} segment(s), {informative} informative", predictions.len());
    Ok(())
}

fn group(ctx: &Ctx) -> Result<()> {
    let videos = ctx.videos()?;
    let clf = ctx.classifier(&videos)?;
    let mut items = Vec::new();
    for v in &videos {
        for s in &v.segments {
            if clf.predict(s, v)?.0.is_informative() {
                items.push(ContextItem::from_segment(s, &v.track)?);
            }
        }
    }
    let assignment = group_by_context(&items, &ctx.cfg.context.to_algorithm()?)?;
    ctx.write("contexts.json", &canonical_json(&assignment)?)?;
    println!("{} context cluster(s), {} noise segment(s)", assignment.clusters.len(), assignment.noise.len());
    Ok(())
}

fn run(ctx: &Ctx, full: bool) -> Result<()> {
    let manifest = ctx.manifest()?;
    let given = ctx.global.model.as_deref().map(Classifier::load).transpose()?;
    let out = run_pipeline(&manifest, &ctx.cfg, given.as_ref())?;
    // nothing is written unless every stage succeeded
    ctx.write("hierarchy.json", &export_report(&out.hierarchy, ReportFormat::Json)?)?;
    if full {
        ctx.write("run_report.json", &canonical_json(&out.report)?)?;
        ctx.write("report.html", &export_report(&out.hierarchy, ReportFormat::Html)?)?;
        ctx.write("predictions.jsonl", &jsonl(&out.predictions)?)?;
        if out.report.model_trained_in_run {
            ctx.write("model.json", &out.classifier.to_json()?)?;
        }
    }
    println!(
        "{} segment(s): {} informative in {} context(s), {} issue cluster(s)",
        out.report.segments_total, out.report.informative, out.report.n_contexts, out.report.n_issue_clusters
    );
    Ok(())
}

fn report(ctx: &Ctx, hierarchy: &Path, format: Format) -> Result<()> {
    let h = IssueHierarchy::from_json(&read(hierarchy)?)?;
    let (format, name) = match format {
        Format::Json => (ReportFormat::Json, "report.json"),
        Format::Html => (ReportFormat::Html, "report.html"),
    };
    let text = export_report(&h, format)?;
    match &ctx.global.out {
        Some(_) => ctx.write(name, &text).map(|_| ()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require_oracles(oracle: bool) -> Result<()> {
    if oracle && !evalstats::ORACLES_AVAILABLE {
        return Err(Error::Config("--oracle needs a build with the `oracle` feature".into()));
    }
    Ok(())
}

fn eval(ctx: &Ctx, what: &EvalCommand, oracle: bool) -> Result<()> {
    require_oracles(oracle)?;
    let seed = ctx.cfg.seed;
    match what {
        EvalCommand::Margin { n, confidence } => {
            let m = evalstats::margin_of_error(*n, *confidence)?;
            ctx.emit("margin", &json!({"n": n, "confidence": confidence, "margin_of_error": m}))
        }
        EvalCommand::Likert { sims, group_size, generator } => {
            let generator = match generator.as_str() {
                "uniform" => LikertGenerator::Uniform,
                "bimodal" => LikertGenerator::Bimodal,
                g => match g.strip_prefix("constant:").and_then(|v| v.parse().ok()) {
                    Some(v) => LikertGenerator::Constant(v),
                    None => return Err(Error::Config(format!("unknown generator `{g}`"))),
                },
            };
            let s = evalstats::simulate_likert_std(*sims, *group_size, generator, seed)?;
            ctx.emit(
                "likert",
                &json!({"group_size": group_size, "generator": generator, "seed": seed, "std": s,
                        "population_std": 2f64.sqrt(), "bimodal_std": evalstats::bimodal_std(*group_size)}),
            )
        }
        EvalCommand::Power { group_size, shift, sd, alpha, sims, test } => {
            let test = match test {
                TestKind::T => PowerTest::TTest,
                TestKind::MannWhitney => PowerTest::MannWhitney,
            };
            let p = evalstats::simulate_power(*group_size, *shift, *sd, *alpha, *sims, seed, test)?;
            ctx.emit(
                "power",
                &json!({"group_size": group_size, "shift": shift, "sd": sd, "alpha": alpha, "seed": seed, "estimate": p}),
            )
        }
        EvalCommand::Mojo { a, b } => {
            let (a, b) = (load_partition(a)?, load_partition(b)?);
            let mut out = json!({
                "n_objects": a.n_objects(),
                "mno": evalstats::mno(&a, &b)?,
                "max_mno": evalstats::max_mno(&b)?,
                "mojo_fm": evalstats::mojo_fm(&a, &b)?,
            });
            if oracle {
                let brute = evalstats::oracle_mno(&a, &b).expect("oracles available")?;
                out["oracle_mno"] = json!(brute);
                if brute != out["mno"] {
                    return Err(Error::Invariant(format!("matching mno {} differs from oracle {brute}", out["mno"])));
                }
            }
            ctx.emit("mojo", &out)
        }
        EvalCommand::Kappa { a, b } => {
            let k = evalstats::cohens_kappa(&load_labels(a)?, &load_labels(b)?)?;
            ctx.emit("kappa", &serde_json::to_value(k)?)
        }
        EvalCommand::MannWhitney { x, y } => {
            let mw = evalstats::mann_whitney_u(x, y)?;
            let mut out = json!({"mann_whitney": mw, "cliffs_delta": evalstats::cliffs_delta(x, y)?});
            if oracle {
                if let Some(p) = evalstats::oracle_mann_whitney_p(x, y) {
                    out["oracle_p_two_sided"] = json!(p);
                    if (p - mw.p_two_sided).abs() > 1e-12 {
                        return Err(Error::Invariant(format!("exact p {} differs from oracle {p}", mw.p_two_sided)));
                    }
                }
            }
            ctx.emit("mann_whitney", &out)
        }
        EvalCommand::Bh { p } => ctx.emit("bh", &json!({"p": p, "adjusted": evalstats::benjamini_hochberg(p)?})),
        EvalCommand::Ratings { file } => {
            let groups: BTreeMap<String, RatingSample> = serde_json::from_str(&read(file)?)?;
            let groups: Vec<(String, RatingSample)> = groups.into_iter().collect();
            let comparisons = evalstats::hypothesis::compare_rating_groups(&groups)?;
            ctx.emit("ratings", &json!({"comparisons": comparisons}))
        }
        EvalCommand::Atomicity { extra } => {
            ctx.emit("atomicity", &json!({"extra_segments": extra, "score": evalstats::atomicity_score(*extra)}))
        }
        EvalCommand::Models => {
            let videos = ctx.videos()?;
            ctx.emit("models", &serde_json::to_value(compare_models(&videos, &ctx.cfg)?)?)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    let ctx = Ctx { cfg, global: cli.global };
    match &cli.command {
        Command::Ingest => ingest(&ctx),
        Command::Segment => segment(&ctx),
        Command::Features => features(&ctx),
        Command::Train => train(&ctx),
        Command::Classify => classify(&ctx),
        Command::Group => group(&ctx),
        Command::Cluster => run(&ctx, false),
        Command::Run => run(&ctx, true),
        Command::Eval { what, oracle } => eval(&ctx, what, *oracle),
        Command::Report { hierarchy, format } => report(&ctx, hierarchy, *format),
        Command::Demo => {
            let seed = ctx.cfg.seed;
            let path = write_dataset(ctx.out_dir()?, &demo_videos(seed), true, seed)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
