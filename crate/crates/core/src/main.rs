use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gesturelet::config::{require_path, RunConfig};
use gesturelet::detector::{DetectorVariant, OnlineDetector, StreamDetector};
use gesturelet::io::stream::{cut_sequences, EventRecord, StreamReader};
use gesturelet::io::synth::{as_stream, concatenate, synth_gestures};
use gesturelet::io::{load_model, parse_ground_truth, save_model, write_ground_truth, write_stream, ModelArchive};
use gesturelet::metrics::MetricsReport;
use gesturelet::pipeline::{concat_eval, eval_classes, recognition_accuracy, train_bundle, tune, EvalDetector};
use gesturelet::tracker::{Similarity, Tracker};
use gesturelet::{Error, SkeletonLayout, SkeletonSequence};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  I/O or other runtime failure
  2  usage or configuration error
  3  input parse error (stream, labels, skeleton or archive syntax)
  4  model mismatch (layout, digests or archive version)";

/// Online skeleton gesture detection.
#[derive(Parser)]
#[command(name = "gesturelet", version, after_help = EXIT_CODES)]
struct Cli {
    /// TOML run configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Skeleton layout: openpose18 or ntu25.
    #[arg(long, global = true)]
    layout: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic train/test streams with ground truth.
    Synth(SynthArgs),
    /// Train a detector and write a model archive.
    Train(TrainArgs),
    /// Track people in a stream and emit detection records.
    Detect(DetectArgs),
    /// Track people in a stream and write it back with track ids.
    Track(TrackArgs),
    /// Segment-level evaluation on concatenated test streams.
    Eval(EvalArgs),
    /// Cross-validated grid search over feature and model hyper-parameters.
    Tune(TuneArgs),
    /// Print a model archive summary.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    sequences: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated class list.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Vanilla,
    Generated,
    Neutral,
}

#[derive(Args)]
struct DataArgs {
    /// Skeleton stream (line-delimited records).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Ground-truth segments for the stream.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Trailing non-positive scores required by the generated variant.
    #[arg(long, default_value_t = 10)]
    trailing: usize,
    #[arg(long)]
    no_augmentation: bool,
    #[arg(long)]
    neutral_class: Option<String>,
    /// Codebook size.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    soft_bins: Option<usize>,
    #[arg(long)]
    kmeans_iterations: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimilarityArg {
    Iou,
    Oks,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Stream to read, `-` for standard input.
    #[arg(long)]
    stream: PathBuf,
    /// Print per-frame latency percentiles to stderr at exit.
    #[arg(long)]
    stats: bool,
    /// Trust person ids present in the stream instead of tracking.
    #[arg(long)]
    use_ids: bool,
    #[arg(long, value_enum)]
    similarity: Option<SimilarityArg>,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    stream: PathBuf,
    #[arg(long, value_enum)]
    similarity: Option<SimilarityArg>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Replace the detector with one that fires exactly on the ground truth.
    #[arg(long)]
    oracle: bool,
    /// Second model to compare against; a delta table is printed.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long = "exclude-class")]
    exclude_class: Vec<String>,
    /// Directory for report.txt and metrics.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    max_points: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    model: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::GridTooLarge { .. } | Error::UnknownClass(_) => 2,
        Error::Parse { .. }
        | Error::LayoutMismatch { .. }
        | Error::MalformedHeader { .. }
        | Error::TruncatedFile { .. }
        | Error::InvalidTimeline(_) => 3,
        Error::ModelMismatch(_) | Error::DigestMismatch(_) | Error::VersionUnsupported(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream reader went away, e.g. `| head`
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(p) => {
            require_path(p)?;
            RunConfig::load(p)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let layout_flag = cli.layout.is_some();
    if let Some(l) = cli.layout {
        cfg.layout = l;
    }
    SkeletonLayout::by_name(&cfg.layout).map_err(|e| Error::Config(e.to_string()))?;
    cfg.propagate();
    match cli.command {
        Command::Synth(a) => cmd_synth(cfg, a),
        Command::Train(a) => cmd_train(cfg, a),
        Command::Detect(a) => cmd_detect(cfg, a, layout_flag),
        Command::Track(a) => cmd_track(cfg, a),
        Command::Eval(a) => cmd_eval(cfg, a),
        Command::Tune(a) => cmd_tune(cfg, a),
        Command::Inspect(a) => cmd_inspect(cfg, a),
    }
}

fn pick(flag: Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf, Error> {
    let p = flag
        .or_else(|| configured.clone())
        .ok_or_else(|| Error::Config(format!("no {what} given")))?;
    require_path(&p)?;
    Ok(p)
}

fn load_sequences(stream: &Path, labels: &Path, layout: &SkeletonLayout) -> Result<Vec<SkeletonSequence>, Error> {
    let reader = StreamReader::new(BufReader::new(File::open(stream)?), layout.clone());
    let frames = reader.collect::<Result<Vec<_>, _>>()?;
    let segments = parse_ground_truth(&std::fs::read_to_string(labels)?)?;
    cut_sequences(&frames, &segments, layout, &stream.display().to_string())
}

fn write_split(dir: &Path, name: &str, seqs: &[SkeletonSequence]) -> Result<(), Error> {
    let (frames, truth) = concatenate(seqs)?;
    let mut out = BufWriter::new(File::create(dir.join(format!("{name}.jsonl")))?);
    write_stream(&mut out, &as_stream(frames, None))?;
    out.flush()?;
    write_ground_truth(File::create(dir.join(format!("{name}.gt.json")))?, &truth.segments)?;
    Ok(())
}

fn cmd_synth(cfg: RunConfig, a: SynthArgs) -> Result<(), Error> {
    if cfg.layout != "openpose18" {
        return Err(Error::Config(
            "the generator only produces the openpose18 layout".into(),
        ));
    }
    let mut sc = cfg.synth;
    if let Some(n) = a.sequences {
        sc.sequences_per_class = n;
    }
    if let Some(s) = a.sigma {
        sc.noise_sigma = s;
    }
    if let Some(c) = a.classes {
        sc.classes = c;
    }
    if !(0.0..=1.0).contains(&a.train_fraction) {
        return Err(Error::Config("train fraction must be in [0, 1]".into()));
    }
    let data = synth_gestures(&sc)?;
    let (train, test) = data.split(a.train_fraction);
    std::fs::create_dir_all(&a.out)?;
    write_split(&a.out, "train", &train)?;
    write_split(&a.out, "test", &test)?;
    eprintln!(
        "seed {}: {} train and {} test sequences written to {}",
        sc.seed,
        train.len(),
        test.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_train(cfg: RunConfig, a: TrainArgs) -> Result<(), Error> {
    let stream = pick(a.data.data, &cfg.paths.train_stream, "training stream (--data)")?;
    let labels = pick(a.data.labels, &cfg.paths.train_labels, "training labels (--labels)")?;
    let out = a
        .out
        .or(cfg.paths.model.clone())
        .ok_or_else(|| Error::Config("no output model path (--out)".into()))?;
    let mut ts = cfg.train.clone();
    if let Some(v) = a.variant {
        ts.variant = match v {
            VariantArg::Vanilla => DetectorVariant::Vanilla,
            VariantArg::Generated => DetectorVariant::Generated {
                s: a.trailing,
                augmentation: !a.no_augmentation,
            },
            VariantArg::Neutral => DetectorVariant::Neutral {
                neutral_class: a.neutral_class.clone().unwrap_or_else(|| ts.neutral_label.clone()),
            },
        };
    }
    if let Some(k) = a.k {
        ts.codebook_size = k;
    }
    if let Some(m) = a.soft_bins {
        ts.soft_bins = m;
    }
    if let Some(i) = a.kmeans_iterations {
        ts.kmeans.max_iter = i;
    }
    let layout = SkeletonLayout::by_name(&ts.layout)?;
    let seqs = load_sequences(&stream, &labels, &layout)?;
    let (bundle, report) = train_bundle(&seqs, &ts)?;
    save_model(&out, &ModelArchive::new(bundle, cfg.seed))?;
    eprintln!("variant {} seed {}", ts.variant.name(), cfg.seed);
    for (c, t) in report.classes.iter().zip(&report.thresholds) {
        eprintln!("  {c:<12} threshold {t:.4}");
    }
    eprintln!(
        "training recognition accuracy {:.4} over {} sequences ({} frames, {} k-means iterations)",
        report.training_accuracy, report.sequences, report.gesturelets, report.kmeans_iterations
    );
    Ok(())
}

fn open_stream(path: &Path) -> Result<Box<dyn BufRead>, Error> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(std::io::stdin())));
    }
    require_path(path)?;
    Ok(Box::new(BufReader::new(File::open(path)?)))
}

fn tracker_config(cfg: &RunConfig, sim: Option<SimilarityArg>) -> gesturelet::TrackerConfig {
    let mut section = cfg.tracker;
    if let Some(s) = sim {
        section.similarity = match s {
            SimilarityArg::Iou => Similarity::Iou,
            SimilarityArg::Oks => Similarity::Oks,
        };
    }
    section.build()
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn cmd_detect(cfg: RunConfig, a: DetectArgs, layout_flag: bool) -> Result<(), Error> {
    let model = pick(a.model, &cfg.paths.model, "model (--model)")?;
    let archive = load_model(&model)?;
    let bundle = Arc::new(archive.bundle);
    if layout_flag && bundle.layout.name != cfg.layout {
        return Err(Error::ModelMismatch(format!(
            "model uses layout {}, --layout asks for {}",
            bundle.layout.name, cfg.layout
        )));
    }
    let input = open_stream(&a.stream)?;
    let mut tracker = Tracker::new(tracker_config(&cfg, a.similarity), bundle.layout.clone())?;
    let mut detectors: HashMap<u64, OnlineDetector> = HashMap::new();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut latencies = Vec::new();
    for frame in StreamReader::new(input, bundle.layout.clone()) {
        let frame = frame?;
        let started = Instant::now();
        let ids: Vec<Option<u64>> = if a.use_ids {
            frame.persons.iter().map(|p| p.id).collect()
        } else {
            let skeletons: Vec<_> = frame.persons.iter().map(|p| p.skeleton.clone()).collect();
            let step = tracker.step(&skeletons);
            for dead in step.died {
                detectors.remove(&dead);
            }
            step.assignments
        };
        let mut events = Vec::new();
        for (person, id) in frame.persons.iter().zip(ids) {
            let Some(id) = id else { continue };
            let det = match detectors.entry(id) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(v) => v.insert(OnlineDetector::spawn(bundle.clone(), id)?),
            };
            events.extend(det.step(&person.skeleton)?);
        }
        latencies.push(started.elapsed().as_secs_f64() * 1e3);
        for e in &events {
            writeln!(out, "{}", EventRecord::from(e).to_line())?;
        }
    }
    out.flush()?;
    if a.stats {
        latencies.sort_by(f64::total_cmp);
        let stats = serde_json::json!({
            "frames": latencies.len(),
            "p50_ms": percentile(&latencies, 0.50),
            "p90_ms": percentile(&latencies, 0.90),
            "p99_ms": percentile(&latencies, 0.99),
            "max_ms": latencies.last().copied().unwrap_or(0.0),
        });
        eprintln!("{stats}");
    }
    Ok(())
}

fn cmd_track(cfg: RunConfig, a: TrackArgs) -> Result<(), Error> {
    let layout = SkeletonLayout::by_name(&cfg.layout)?;
    let input = open_stream(&a.stream)?;
    let mut tracker = Tracker::new(tracker_config(&cfg, a.similarity), layout.clone())?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let (mut births, mut deaths) = (0usize, 0usize);
    for frame in StreamReader::new(input, layout) {
        let mut frame = frame?;
        let skeletons: Vec<_> = frame.persons.iter().map(|p| p.skeleton.clone()).collect();
        let step = tracker.step(&skeletons);
        births += step.born.len();
        deaths += step.died.len();
        for (p, id) in frame.persons.iter_mut().zip(step.assignments) {
            p.id = id;
        }
        write_stream(&mut out, std::slice::from_ref(&frame))?;
    }
    out.flush()?;
    eprintln!("tracks born {births}, retired {deaths}");
    Ok(())
}

fn evaluate_model(
    path: &Path,
    test: &[SkeletonSequence],
    cfg: &RunConfig,
    oracle: bool,
) -> Result<MetricsReport, Error> {
    let archive = load_model(path)?;
    let classes = eval_classes(&archive.bundle, &cfg.eval);
    let name = if oracle {
        "oracle"
    } else {
        archive.bundle.variant.name()
    };
    let detector = if oracle {
        EvalDetector::Oracle
    } else {
        EvalDetector::Model(Arc::new(archive.bundle))
    };
    concat_eval(test, &detector, &classes, &cfg.eval, name)
}

fn cmd_eval(mut cfg: RunConfig, a: EvalArgs) -> Result<(), Error> {
    let model = pick(a.model, &cfg.paths.model, "model (--model)")?;
    let stream = pick(a.data.data, &cfg.paths.test_stream, "test stream (--data)")?;
    let labels = pick(a.data.labels, &cfg.paths.test_labels, "test labels (--labels)")?;
    let baseline = a.baseline.map(|p| require_path(&p).map(|_| p)).transpose()?;
    if let Some(r) = a.repetitions {
        cfg.eval.repetitions = r;
    }
    cfg.eval.exclude_classes.extend(a.exclude_class);
    let layout = SkeletonLayout::by_name(&cfg.layout)?;
    let test = load_sequences(&stream, &labels, &layout)?;
    let report = evaluate_model(&model, &test, &cfg, a.oracle)?;
    let mut text = report.table();
    let mut records = vec![report.clone()];
    if let Some(b) = baseline {
        let base = evaluate_model(&b, &test, &cfg, false)?;
        text.push('\n');
        text.push_str(&base.table());
        text.push('\n');
        text.push_str(&report.delta_table(&base));
        records.push(base);
    }
    eprint!("{text}");
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for r in &records {
        writeln!(out, "{}", serde_json::to_string(r).expect("reports serialize"))?;
    }
    if let Some(dir) = a.out {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("report.txt"), &text)?;
        std::fs::write(
            dir.join("metrics.json"),
            serde_json::to_string_pretty(&records).expect("reports serialize"),
        )?;
    }
    Ok(())
}

fn cmd_tune(mut cfg: RunConfig, a: TuneArgs) -> Result<(), Error> {
    let stream = pick(a.data.data, &cfg.paths.train_stream, "training stream (--data)")?;
    let labels = pick(a.data.labels, &cfg.paths.train_labels, "training labels (--labels)")?;
    if let Some(f) = a.folds {
        cfg.tune.folds = f;
    }
    if let Some(m) = a.max_points {
        cfg.tune.max_points = m;
    }
    let layout = SkeletonLayout::by_name(&cfg.layout)?;
    let seqs = load_sequences(&stream, &labels, &layout)?;
    let ranking = tune(&seqs, &cfg.train, &cfg.tune)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (rank, r) in ranking.iter().enumerate() {
        let rec = serde_json::json!({
            "rank": rank + 1,
            "seed": cfg.seed,
            "accuracy": r.accuracy,
            "alpha": r.point.alpha,
            "beta": r.point.beta,
            "gamma": r.point.gamma,
            "codebook_size": r.point.codebook_size,
            "soft_bins": r.point.soft_bins,
            "weight_factor": r.point.weight_factor,
        });
        writeln!(out, "{rec}")?;
    }
    if let Some(best) = ranking.first() {
        eprintln!("best accuracy {:.4} at {:?}", best.accuracy, best.point);
    }
    Ok(())
}

fn cmd_inspect(cfg: RunConfig, a: InspectArgs) -> Result<(), Error> {
    let model = pick(a.model, &cfg.paths.model, "model (--model)")?;
    let archive = load_model(&model)?;
    let b = &archive.bundle;
    let summary = serde_json::json!({
        "format_version": archive.format_version,
        "seed": archive.seed,
        "layout": b.layout.name,
        "variant": b.variant,
        "gesturelet": b.gesturelet,
        "codebook_size": b.codebook.size(),
        "descriptor_len": b.codebook.dim(),
        "soft_bins": b.soft_bins,
        "classes": b.model.classes,
        "thresholds": b.model.per_class.iter().map(|c| c.threshold).collect::<Vec<_>>(),
        "mean_train_length": b.model.mean_train_length,
        "digests": archive.digests,
    });
    println!("{summary}");
    if let Ok((acc, n)) = recognition_accuracy_on_paths(&cfg, b) {
        eprintln!("recognition accuracy on configured test set: {acc:.4} over {n} sequences");
    }
    Ok(())
}

fn recognition_accuracy_on_paths(cfg: &RunConfig, b: &gesturelet::DetectorBundle) -> Result<(f64, usize), Error> {
    let (Some(s), Some(l)) = (&cfg.paths.test_stream, &cfg.paths.test_labels) else {
        return Err(Error::EmptyInput);
    };
    let test = load_sequences(s, l, &b.layout)?;
    recognition_accuracy(b, &test)
}
