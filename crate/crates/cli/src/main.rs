//! `iedetect`: detection, evaluation, ROC sweeps and synthetic recordings.
//!
//! Exit status is 0 on success, 2 on configuration, spec or usage errors and
//! 1 on any other error. Failures print one line, `iedetect: <kind> error: ...`,
//! on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iedetect::eval::{self, RocCurve};
use iedetect::pipeline::render_features;
use iedetect::postclass::PostclassConfig;
use iedetect::signal_io::{self, write_text};
use iedetect::synth;
use iedetect::{EventClass, Error, Pipeline, PipelineConfig, Result};

#[derive(Parser)]
#[command(name = "iedetect", version, about = "Interictal epileptiform discharge detector for multi-channel EEG")]
struct Cli {
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a recording and write the detection list.
    Detect {
        recording: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Epileptiform threshold on the fuzzy score.
        #[arg(long)]
        threshold: Option<f64>,
        /// Detection CSV; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-event feature table, before post-classification.
        #[arg(long)]
        dump_features: Option<PathBuf>,
    },
    /// Compare a detection list with expert marks.
    Evaluate {
        detections: PathBuf,
        annotations: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Recording whose channels define the label space.
        #[arg(long)]
        recording: Option<PathBuf>,
        /// Sweep the configured thresholds over the detection scores; events
        /// rejected by a post-classification rule stay negative.
        #[arg(long)]
        sweep: bool,
        /// Counts CSV, or the report prefix with `--sweep`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the fuzzy threshold and write an ROC report.
    Roc {
        recording: PathBuf,
        annotations: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Report prefix: writes `<out>.csv` and `<out>.svg`.
        #[arg(long, default_value = "roc")]
        out: PathBuf,
    },
    /// Write a synthetic recording and its marks.
    Synth {
        /// Spec file (TOML) or preset name (corpus-0, corpus-1, corpus-2).
        spec: String,
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip the rejection rules.
    #[arg(long)]
    no_postclass: bool,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    path.map_or_else(|| Ok(PipelineConfig::default()), PipelineConfig::load)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Spec(_) => 2,
        _ => 1,
    }
}

fn rate(r: Result<f64>) -> String {
    r.map_or_else(|_| "NA".to_string(), |v| format!("{v:.4}"))
}

fn report_optimal(curve: &RocCurve) {
    match &curve.optimal {
        Some(p) => println!(
            "optimal threshold {:.2}: sensitivity {} specificity {}",
            p.threshold,
            p.sensitivity.map_or("NA".into(), |v| format!("{v:.4}")),
            p.specificity.map_or("NA".into(), |v| format!("{v:.4}"))
        ),
        None => println!("optimal threshold: NA"),
    }
}

fn detect(
    recording: &Path,
    run: &RunArgs,
    threshold: Option<f64>,
    out: Option<&Path>,
    dump_features: Option<&Path>,
) -> Result<()> {
    let mut config = load_config(run.config.as_deref())?;
    if let Some(t) = threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Range(format!("threshold must lie in [0, 1], got {t}")));
        }
        config.bands.epileptiform = t;
    }
    let pipeline = Pipeline::new(config)?;
    let rec = signal_io::read_recording(recording)?;
    let events = pipeline.analyze(&rec)?;
    if let Some(path) = dump_features {
        write_text(path, &render_features(&events))?;
    }
    let list = pipeline.postclass(&events, !run.no_postclass)?;
    log::info!("{} events, {} positive", list.len(), list.positives().count());
    let csv = signal_io::render_detections(&list);
    match out {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn evaluate(
    detections: &Path,
    annotations: &Path,
    config: Option<&Path>,
    recording: Option<&Path>,
    sweep: bool,
    out: Option<&Path>,
) -> Result<()> {
    let config = load_config(config)?;
    let det = signal_io::read_detections::<f64>(detections)?;
    let ann = signal_io::read_annotations(annotations)?;
    let labels = recording.map(signal_io::read_recording_labels).transpose()?.map(|(_, l)| l);
    let tol = config.tolerance_ms;
    if sweep {
        let points = config
            .thresholds
            .iter()
            .map(|&t| {
                let events = det
                    .events()
                    .iter()
                    .map(|d| {
                        let positive = d.score >= t && d.rejected_by.is_none();
                        let class = if positive { EventClass::Epileptiform } else { EventClass::NonEpileptiform };
                        iedetect::Detection { class, ..d.clone() }
                    })
                    .collect();
                let list = iedetect::DetectionList::new(events)?;
                Ok(eval::RocPoint::from_counts(t, eval::match_events(&list, &ann, tol, labels.as_deref())?))
            })
            .collect::<Result<Vec<_>>>()?;
        let curve = RocCurve::from_points(points);
        print!("{}", eval::render_roc_csv(&curve));
        report_optimal(&curve);
        if let Some(prefix) = out {
            eval::write_report(&curve, prefix)?;
        }
        return Ok(());
    }
    let counts = eval::match_events(&det, &ann, tol, labels.as_deref())?;
    println!(
        "tp {} fp {} tn {} fn {}\nsensitivity {}\nspecificity {}",
        counts.tp,
        counts.fp,
        counts.tn,
        counts.fn_,
        rate(eval::sensitivity(&counts)),
        rate(eval::specificity(&counts))
    );
    match out {
        Some(path) => write_text(path, &eval::render_counts_csv(&counts)),
        None => Ok(()),
    }
}

fn roc(recording: &Path, annotations: &Path, run: &RunArgs, out: &Path) -> Result<()> {
    let config = load_config(run.config.as_deref())?;
    let pipeline = Pipeline::new(config)?;
    let rec = signal_io::read_recording(recording)?;
    let ann = signal_io::read_annotations(annotations)?;
    eval::match_events(&iedetect::DetectionList::default(), &ann, 0.0, Some(&rec.labels()))?;
    let events = pipeline.analyze(&rec)?;
    let cfg = pipeline.config();
    let post = if run.no_postclass { PostclassConfig::disabled() } else { cfg.postclass.clone() };
    let curve = eval::roc_sweep(&events, &ann, &cfg.thresholds, &post, cfg.tolerance_ms)?;
    eval::write_report(&curve, out)?;
    print!("{}", eval::render_roc_csv(&curve));
    report_optimal(&curve);
    Ok(())
}

fn synth_cmd(spec: &str, out_dir: &Path) -> Result<()> {
    let spec = match synth::preset_by_name(spec) {
        Some(s) => s,
        None if Path::new(spec).is_file() => synth::read_spec(spec)?,
        None => return Err(Error::Spec(format!("{spec:?} is neither a preset nor a spec file"))),
    };
    let (rec, ann) = synth::generate::<f64>(&spec)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io { path: out_dir.into(), source: e })?;
    let name = if spec.name.is_empty() { "synth" } else { spec.name.as_str() };
    let rec_path = out_dir.join(format!("{name}.eegr"));
    let ann_path = out_dir.join(format!("{name}.csv"));
    signal_io::write_recording(&rec, &rec_path)?;
    signal_io::write_annotations(&ann, &ann_path)?;
    println!("{}\n{}", rec_path.display(), ann_path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::Range("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Range(format!("cannot start {n} workers: {e}")))?;
    }
    match &cli.command {
        Command::Detect { recording, run, threshold, out, dump_features } => {
            detect(recording, run, *threshold, out.as_deref(), dump_features.as_deref())
        }
        Command::Evaluate { detections, annotations, config, recording, sweep, out } => {
            evaluate(detections, annotations, config.as_deref(), recording.as_deref(), *sweep, out.as_deref())
        }
        Command::Roc { recording, annotations, run, out } => roc(recording, annotations, run, out),
        Command::Synth { spec, out_dir } => synth_cmd(spec, out_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let kind = e.kind();
            if msg.starts_with(kind) {
                eprintln!("iedetect: {msg}");
            } else {
                eprintln!("iedetect: {kind} error: {msg}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
