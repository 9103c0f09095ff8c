//! `rotdet`: evaluation, geometry queries, NMS, synthetic data and the
//! gradient-descent demos from the command line.
//!
//! Exit codes: 0 success, 2 bad usage, 3 file access, 4 malformed or
//! mismatched input file, 5 invalid parameter or box, 1 anything else.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use rotdet_core::eval::aspect_ratio_histogram;
use rotdet_core::io::{write_scene, CorruptionConfig, PredFrame, PredVideo};
use rotdet_core::trainer::{fit_synthetic, range_label};
use rotdet_core::{
    evaluate, fit, iou, load_annotations, load_predictions, nms, save_predictions, synthetic_ablation,
    AblationConfig, AngleLossKind, CodecParams, Detection, Error, EvalConfig, FitConfig, FitInit, NmsConfig,
    PredictionSet, RotatedBox, SynthConfig,
};

#[derive(Parser)]
#[command(name = "rotdet", version, about = "Rotated-box people detection toolkit")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Aligned table, four decimals.
    Human,
    /// JSON at full precision.
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Range {
    /// Angles predicted in (-pi, pi).
    Wide,
    /// Angles predicted in (-pi/2, pi/2).
    Narrow,
    /// Raw output is the angle itself.
    Unbounded,
}

impl Range {
    fn params(self) -> CodecParams {
        match self {
            Range::Wide => CodecParams::wide(),
            Range::Narrow => CodecParams::narrow(),
            Range::Unbounded => CodecParams::unbounded(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// AP50 and P/R/F of a prediction file against annotations.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Confidence threshold for precision, recall and F.
        #[arg(long, default_value_t = 0.3)]
        conf: f64,
        /// IoU needed for a match.
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Pool all frames instead of averaging per video.
        #[arg(long)]
        pooled: bool,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the PR curve as CSV here.
        #[arg(long)]
        pr_csv: Option<PathBuf>,
    },
    /// IoU of two boxes given as `cx,cy,w,h,angle` (angle in degrees).
    Iou {
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long, allow_hyphen_values = true)]
        b: String,
        /// Angles are in radians.
        #[arg(long)]
        radians: bool,
    },
    /// Confidence filter and rotated NMS over every frame of a prediction file.
    Nms {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        conf: f64,
        #[arg(long, default_value_t = 0.45)]
        iou: f64,
    },
    /// Generate a synthetic annotation set (and noisy predictions).
    Synth {
        /// TOML generator settings; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        videos: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
        /// Also write detector-like predictions with default corruption.
        #[arg(long)]
        noisy: bool,
        /// Output directory.
        #[arg(long, default_value = "synth")]
        out: PathBuf,
    },
    /// Fit one box from a turned start and report convergence.
    FitDemo {
        #[arg(long, value_parser = parse_kind, default_value = "periodic-l1")]
        loss: AngleLossKind,
        #[arg(long, value_enum, default_value_t = Range::Wide)]
        range: Range,
        /// Initial angle offset from the ground truth, radians.
        #[arg(long, default_value_t = 0.8 * PI, allow_hyphen_values = true)]
        delta: f64,
        #[arg(long, default_value_t = 0.002)]
        lr: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Ground-truth box `cx,cy,w,h,angle` (degrees) in the 128 px demo image.
        #[arg(long, default_value = "64,64,24,60,-83.1245", allow_hyphen_values = true)]
        gt: String,
        /// Write the per-step trajectory here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Angle-loss / prediction-range ablation on synthetic data.
    Ablation {
        /// TOML ablation settings; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Largest initial angle offset, radians.
        #[arg(long)]
        max_delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Histogram of predicted h/w.
    ///
    /// Without `--pred`, the boxes come from the synthetic fitting demo and
    /// keep the orientation they were decoded with. Boxes read from a file
    /// are canonical, so their ratio is always at least 1.
    Hist {
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_kind, default_value = "periodic-l1")]
        loss: AngleLossKind,
        #[arg(long, value_enum, default_value_t = Range::Wide)]
        range: Range,
    },
}

fn parse_kind(s: &str) -> Result<AngleLossKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_box(s: &str, radians: bool) -> anyhow::Result<RotatedBox> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::Config(format!("bad box '{s}': {e}")))?;
    let [cx, cy, w, h, a] = v[..] else {
        return Err(Error::Config(format!("box '{s}' needs five values cx,cy,w,h,angle")).into());
    };
    let theta = if radians { a } else { a.to_radians() };
    Ok(RotatedBox::new(cx, cy, w, h, theta)?)
}

fn check_unit(name: &str, v: f64) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("--{name} must be in [0, 1], got {v}")).into());
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let json = cli.format == Format::Json;
    match cli.command {
        Command::Eval {
            gt,
            pred,
            conf,
            iou,
            pooled,
            out,
            pr_csv,
        } => {
            check_unit("conf", conf)?;
            check_unit("iou", iou)?;
            let gt = load_annotations(&gt)?;
            let preds = load_predictions(&pred)?;
            info!("{} annotated boxes, {} predictions", gt.num_boxes(), preds.all_detections().len());
            let report = evaluate(&gt, &preds, &EvalConfig { iou_threshold: iou, conf_threshold: conf, pooled })?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            if let Some(path) = out {
                write_text(&path, &report.to_json())?;
            }
            if let Some(path) = pr_csv {
                report.write_pr_csv(&path)?;
            }
        }
        Command::Iou { a, b, radians } => {
            let (a, b) = (parse_box(&a, radians)?, parse_box(&b, radians)?);
            let v = iou(&a.canonicalize()?, &b.canonicalize()?);
            if json {
                print_json(&serde_json::json!({ "iou": v }))?;
            } else {
                println!("{v:.4}");
            }
        }
        Command::Nms { pred, out, conf, iou } => {
            let cfg = NmsConfig { conf_threshold: conf, iou_threshold: iou };
            cfg.validate()?;
            let preds = load_predictions(&pred)?;
            let before = preds.all_detections().len();
            let kept = PredictionSet {
                videos: preds
                    .videos
                    .into_iter()
                    .map(|v| PredVideo {
                        name: v.name,
                        frames: v
                            .frames
                            .into_iter()
                            .map(|f| PredFrame {
                                detections: nms(&f.detections, &cfg),
                                name: f.name,
                            })
                            .collect(),
                    })
                    .collect(),
            };
            save_predictions(&kept, &out)?;
            let after = kept.all_detections().len();
            if json {
                print_json(&serde_json::json!({ "input": before, "kept": after }))?;
            } else {
                println!("kept {after} of {before} detections");
            }
        }
        Command::Synth {
            config,
            seed,
            videos,
            frames,
            noisy,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => SynthConfig::load(path)?,
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(v) = videos {
                cfg.videos = v;
            }
            if let Some(f) = frames {
                cfg.frames = f;
            }
            if noisy && cfg.corruption.is_none() {
                cfg.corruption = Some(CorruptionConfig::default());
            }
            let (gt, preds) = rotdet_core::generate_scene(&cfg)?;
            let written = write_scene(&out, &gt, preds.as_ref())?;
            if json {
                print_json(&serde_json::json!({ "boxes": gt.num_boxes(), "files": written }))?;
            } else {
                println!("{} boxes", gt.num_boxes());
                for p in written {
                    println!("wrote {}", p.display());
                }
            }
        }
        Command::FitDemo {
            loss,
            range,
            delta,
            lr,
            steps,
            gt,
            csv,
        } => {
            let gt = parse_box(&gt, false)?;
            let mut cfg = FitConfig::new(loss, range.params(), FitInit::angle(delta));
            cfg.lr = lr;
            cfg.steps = steps;
            let t = fit(&cfg, &gt)?;
            if let Some(path) = csv {
                t.write_csv(&path)?;
            }
            let last = t.final_record();
            if json {
                print_json(&serde_json::json!({
                    "loss": loss,
                    "range": range_label(&cfg.params),
                    "delta": delta,
                    "failed": t.failed,
                    "final_angular_error": t.final_angular_error,
                    "final_box": last.decoded,
                    "final_conf": last.conf,
                    "final_loss": last.loss,
                }))?;
            } else {
                let b = last.decoded;
                println!("loss {loss}, range {}, start offset {delta:.4} rad", range_label(&cfg.params));
                println!(
                    "final box  cx {:.4} cy {:.4} w {:.4} h {:.4} angle {:.4} rad, conf {:.4}",
                    b.cx, b.cy, b.w, b.h, b.theta, last.conf
                );
                println!("final loss {:.4}", last.loss.total);
                if t.failed {
                    println!("diverged after {} steps", t.records.len() - 1);
                } else {
                    println!("angular error {:.4} rad", t.final_angular_error);
                }
            }
        }
        Command::Ablation {
            config,
            seed,
            steps,
            lr,
            max_delta,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::Io { path: path.clone(), source: e })?;
                    AblationConfig::parse(&text)?
                }
                None => AblationConfig::default(),
            };
            if let Some(s) = seed {
                cfg.synth.seed = s;
            }
            if let Some(s) = steps {
                cfg.steps = s;
            }
            if let Some(v) = lr {
                cfg.lr = v;
            }
            if let Some(v) = max_delta {
                cfg.max_delta = v;
            }
            let report = synthetic_ablation(&cfg)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            if let Some(path) = out {
                write_text(&path, &report.to_json())?;
            }
        }
        Command::Hist {
            pred,
            bins,
            seed,
            loss,
            range,
        } => {
            if bins == 0 {
                bail!(Error::Config("--bins must be positive".into()));
            }
            let dets: Vec<Detection> = match pred {
                Some(path) => load_predictions(&path)?.all_detections(),
                None => {
                    let mut cfg = AblationConfig::default();
                    if let Some(s) = seed {
                        cfg.synth.seed = s;
                    }
                    let (_, fitted) = fit_synthetic(&cfg, &range.params(), loss)?;
                    fitted.into_iter().map(|o| o.detection).collect()
                }
            };
            let hist = aspect_ratio_histogram(&dets, bins)?;
            if json {
                print_json(&hist)?;
            } else {
                print!("{}", hist.to_text());
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io { .. }) => 3,
        Some(Error::Parse { .. } | Error::SchemaVersion { .. } | Error::Validation { .. }) => 4,
        Some(
            Error::Config(_)
            | Error::InvalidBox(_)
            | Error::OutOfBounds { .. }
            | Error::IndexOutOfRange { .. }
            | Error::NoGroundTruth,
        ) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}
