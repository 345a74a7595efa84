use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use endosight_core::dataset::{
    dataset_stats, deterministic_split, emit_yolo_labels, parse_bbox_json, DatasetManifest,
    DEFAULT_SEED,
};
use endosight_core::inference::SceneSpec;
use endosight_core::metrics::{
    evaluate_detection_dirs, evaluate_segmentation_dirs, table_to_csv, EvaluationReport,
    ScoreTable, DEFAULT_MATCH_IOU,
};
use endosight_core::pipeline::{
    demo_scene, frame_paths, load_frames, run_pipeline, scene_frames, Pipeline, PipelineConfig,
    PipelineSummary, SegmentationMode, TimingMode,
};
use endosight_core::supervisor::{
    run_chunked, Clock, CommandJob, DemoJob, EventLog, NvidiaSmiTelemetry, ReplayTelemetry,
    SimulatedClock, SupervisedJob, TelemetrySource, ThermalPolicy, WallClock,
};

#[derive(Parser)]
#[command(name = "endosight", version, about = "Polyp detection/segmentation runtime and evaluation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic 70/15/15 train/val/test split of a dataset directory
    Split {
        /// Dataset root containing images/ (and optionally masks/)
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Convert bounding-box JSON annotations to YOLO label files
    Labels {
        /// Annotation file (bounding-boxes.json layout)
        #[arg(long)]
        bbox: PathBuf,
        /// Dataset root; image dimensions are read from images/
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Image dimension statistics over a seeded random sample
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100)]
        sample: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate predicted masks against ground-truth masks
    EvalSeg {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate YOLO-format detections against ground-truth labels
    EvalDet {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        conf: f64,
        #[arg(long, default_value_t = DEFAULT_MATCH_IOU)]
        iou: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the detect-then-segment pipeline over a directory of frames
    Run {
        /// Directory of PNG/JPEG frames, processed in file-name order
        #[arg(long)]
        input: PathBuf,
        /// Scene description for the stub backends (JSON list of polyps)
        #[arg(long)]
        scene: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Synthesize a scene video and run the pipeline on it with stub backends
    Demo {
        #[arg(long, default_value_t = 100)]
        frames: u64,
        #[arg(long, default_value_t = 640)]
        width: u32,
        #[arg(long, default_value_t = 480)]
        height: u32,
        /// Scene description; defaults to one drifting polyp
        #[arg(long)]
        scene: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Run a job under the thermal-aware supervision protocol
    Supervise {
        #[arg(long)]
        epochs: u64,
        /// Policy JSON; missing keys take the defaults
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        steps_per_epoch: u64,
        /// `nvidia-smi`, or a file of CSV telemetry lines replayed one per poll
        #[arg(long, default_value = "nvidia-smi")]
        telemetry: String,
        /// Use a simulated clock: pauses return immediately
        #[arg(long)]
        simulate: bool,
        /// Simulated seconds charged per step
        #[arg(long, default_value_t = 1.0)]
        step_seconds: f64,
        #[command(flatten)]
        out: OutArg,
        /// Command to run once per step; the built-in demo job is used if absent
        #[arg(last = true)]
        command: Vec<String>,
    },
}

#[derive(Args)]
struct OutArg {
    /// Output directory (default: $ENDOSIGHT_OUT, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArg {
    fn resolve(&self) -> PathBuf {
        PipelineConfig::default().resolve_output_dir(self.out.as_deref(), "out")
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Roi,
    FullFrame,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline configuration JSON; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: config, then $ENDOSIGHT_OUT, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    detector: Option<String>,
    #[arg(long)]
    segmenter: Option<String>,
    #[arg(long)]
    conf: Option<f64>,
    #[arg(long)]
    nms_iou: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Pixel size in millimetres; enables size classes
    #[arg(long)]
    mm_per_px: Option<f64>,
    #[arg(long)]
    stream_id: Option<String>,
    /// Stamp frames with the wall clock instead of the nominal frame rate
    #[arg(long)]
    wall_clock: bool,
}

impl PipelineArgs {
    fn config(&self) -> Result<(PipelineConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.detector {
            cfg.detector = v.clone();
        }
        if let Some(v) = &self.segmenter {
            cfg.segmenter = v.clone();
        }
        if let Some(v) = self.conf {
            cfg.conf_threshold = v;
        }
        if let Some(v) = self.nms_iou {
            cfg.nms_iou = v;
        }
        if let Some(m) = self.mode {
            cfg.segmentation_mode = match m {
                ModeArg::Roi => SegmentationMode::Roi,
                ModeArg::FullFrame => SegmentationMode::FullFrame,
            };
        }
        if let Some(v) = self.mm_per_px {
            cfg.calibration.mm_per_px = Some(v);
        }
        if let Some(v) = &self.stream_id {
            cfg.stream_id = v.clone();
        }
        if self.wall_clock {
            cfg.timing = TimingMode::Wall;
        }
        cfg.validate()?;
        let out = cfg.resolve_output_dir(self.out.as_deref(), "out");
        Ok((cfg, out))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_scene(path: &Path) -> Result<SceneSpec> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    SceneSpec::from_json(&bytes).with_context(|| format!("scene {}", path.display()))
}

fn write_report(out: &Path, report: &EvaluationReport, table: &ScoreTable) -> Result<()> {
    create_dir(out)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_file(&out.join("report.json"), &json)?;
    write_file(&out.join("scores.csv"), &table_to_csv(table))
}

fn report_pipeline(s: &PipelineSummary, out: &Path) {
    eprintln!(
        "processed {} frames, {} track(s), {:.1} frames/s measured (meter {:.1}); output in {}",
        s.frames,
        s.track_ids.len(),
        s.wall_fps,
        s.meter_fps,
        out.display()
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Split { data, seed, out } => {
            let manifest = DatasetManifest::scan(&data, false)?;
            let split = deterministic_split(&manifest.ids(), seed)?;
            let dir = out.resolve();
            create_dir(&dir)?;
            write_file(&dir.join("split.json"), &split.to_json())?;
            eprintln!(
                "split {} ids: train {}, val {}, test {} (seed {seed})",
                manifest.entries.len(),
                split.train.len(),
                split.val.len(),
                split.test.len()
            );
        }
        Command::Labels { bbox, data, out } => {
            let bytes = fs::read(&bbox).with_context(|| format!("reading {}", bbox.display()))?;
            let parsed = parse_bbox_json(&bytes).with_context(|| bbox.display().to_string())?;
            for d in &parsed.diagnostics {
                eprintln!("skipped record {d}");
            }
            let manifest = DatasetManifest::scan(&data, false)?;
            let labels = emit_yolo_labels(&parsed.records, &manifest.dims())?;
            let dir = out.resolve();
            create_dir(&dir)?;
            for (id, text) in &labels {
                write_file(&dir.join(format!("{id}.txt")), text)?;
            }
            eprintln!("wrote {} label files to {}", labels.len(), dir.display());
        }
        Command::Stats { data, sample, seed, out } => {
            let manifest = DatasetManifest::scan(&data, false)?;
            let stats = dataset_stats(&manifest, sample, seed)?;
            let dir = out.resolve();
            create_dir(&dir)?;
            let mut json = serde_json::to_string_pretty(&stats)?;
            json.push('\n');
            write_file(&dir.join("stats.json"), &json)?;
            eprintln!(
                "{} sampled: mean {:.1}x{:.1}, {} unique dimensions",
                stats.n_sampled, stats.mean_w, stats.mean_h, stats.unique_dims
            );
        }
        Command::EvalSeg { pred, gt, out } => {
            let e = evaluate_segmentation_dirs(&pred, &gt)?;
            write_report(&out.resolve(), &e.report, &e.table)?;
            if let Some(d) = e.report.metric("dice") {
                eprintln!("{} samples, mean dice {:.4}", e.report.sample_count, d.mean);
            }
        }
        Command::EvalDet { pred, gt, conf, iou, out } => {
            let e = evaluate_detection_dirs(&pred, &gt, conf, iou)?;
            write_report(&out.resolve(), &e.report, &e.table)?;
            match e.report.map_at_50 {
                Some(m) => eprintln!("{} images, mAP@0.5 {m:.4}", e.report.sample_count),
                None => eprintln!("{} images, no ground truth: mAP undefined", e.report.sample_count),
            }
        }
        Command::Run { input, scene, pipeline } => {
            let (cfg, out) = pipeline.config()?;
            let scene = scene.as_deref().map(read_scene).transpose()?;
            let mut p = Pipeline::from_config(cfg, scene.as_ref())?;
            let frames = load_frames(frame_paths(&input)?);
            let s = run_pipeline(frames, &mut p, &out)?;
            report_pipeline(&s, &out);
        }
        Command::Demo { frames, width, height, scene, pipeline } => {
            if width == 0 || height == 0 {
                bail!("frame size must be positive");
            }
            let (cfg, out) = pipeline.config()?;
            let scene = match scene {
                Some(p) => read_scene(&p)?,
                None => demo_scene(),
            };
            let mut p = Pipeline::from_config(cfg, Some(&scene))?;
            let s = run_pipeline(scene_frames(&scene, frames, width, height), &mut p, &out)?;
            report_pipeline(&s, &out);
        }
        Command::Supervise {
            epochs,
            policy,
            steps_per_epoch,
            telemetry,
            simulate,
            step_seconds,
            out,
            command,
        } => {
            let policy = match policy {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    ThermalPolicy::from_json(&text).with_context(|| p.display().to_string())?
                }
                None => ThermalPolicy::default(),
            };
            let mut source: Box<dyn TelemetrySource> = if telemetry == "nvidia-smi" {
                Box::new(NvidiaSmiTelemetry::default())
            } else {
                Box::new(ReplayTelemetry::from_file(Path::new(&telemetry))?)
            };
            let mut clock: Box<dyn Clock> = if simulate {
                Box::new(SimulatedClock::new(0.0, step_seconds.max(0.0)))
            } else {
                Box::new(WallClock)
            };
            let mut job: Box<dyn SupervisedJob> = match command.split_first() {
                Some((program, args)) => Box::new(CommandJob {
                    program: program.clone(),
                    args: args.to_vec(),
                    steps_per_epoch,
                }),
                None => Box::new(DemoJob::new(steps_per_epoch)),
            };
            let dir = out.resolve();
            create_dir(&dir)?;
            let log_path = dir.join("events.jsonl");
            let file = fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
            let mut log = EventLog::with_sink(Box::new(std::io::BufWriter::new(file)));
            let summary = run_chunked(
                epochs,
                &policy,
                job.as_mut(),
                source.as_mut(),
                clock.as_mut(),
                &mut [],
                &mut log,
            )?;
            eprintln!(
                "{} steps, {} events, last checkpoint {}; log in {}",
                summary.steps_run,
                log.events().len(),
                summary.last_checkpoint.as_deref().unwrap_or("none"),
                log_path.display()
            );
            if !summary.completed {
                bail!("job failed; see {}", log_path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
