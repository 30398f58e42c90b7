use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use probbox::commands::{cmd_eval, cmd_infer, cmd_jiou, cmd_render, cmd_synth, SynthOptions};
use probbox::config::RunConfig;
use probbox::eval::{FrameSpec, NoiseSpec};
use probbox::Result;

/// Label uncertainty, spatial densities and JIoU evaluation for LiDAR boxes.
#[derive(Parser)]
#[command(name = "probbox", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand)]
enum Command {
    /// Infer per-object label posteriors from a KITTI-layout dataset.
    Infer,
    /// Rasterize the spatial density of one object for each prior weight.
    Render,
    /// Per-detection IoU and JIoU against matched labels.
    Jiou,
    /// Recall, ROC, corner variance or alignment reports.
    Eval,
    /// Write a synthetic dataset with detections and bad-label flags.
    Synth(SynthArgs),
}

/// Every setting is also a `key = value` line of the `--config` file.
#[derive(Args)]
struct Settings {
    /// Config file applied before the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// KITTI-layout dataset root.
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Comma-separated frame ids; all frames when absent.
    #[arg(long, global = true)]
    frames: Option<String>,
    /// Detections as JSON lines.
    #[arg(long, global = true)]
    detections: Option<String>,
    /// Label distributions as written by `infer`.
    #[arg(long, global = true)]
    labels: Option<String>,
    /// Lines of `frame object` naming bad labels.
    #[arg(long = "bad-labels", global = true)]
    bad_labels: Option<String>,
    /// Prior weight, or a comma-separated sweep for `render`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    weight: Option<String>,
    /// LiDAR noise in meters, or `em`.
    #[arg(long, global = true)]
    sigma: Option<String>,
    /// Grid cell size in meters.
    #[arg(long, global = true)]
    resolution: Option<String>,
    /// Interior sampling grid, `NxM`.
    #[arg(long, global = true)]
    interior: Option<String>,
    /// Monte Carlo samples.
    #[arg(long, global = true)]
    samples: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Class filter; empty accepts all.
    #[arg(long, global = true)]
    class: Option<String>,
    #[arg(long = "length-min", global = true)]
    length_min: Option<String>,
    #[arg(long = "length-max", global = true)]
    length_max: Option<String>,
    /// Output file, or directory for `render`, `eval` and `synth`.
    #[arg(long, global = true)]
    out: Option<String>,
    /// recall, roc, corner-tv or alignment.
    #[arg(long, global = true)]
    report: Option<String>,
    /// Comma-separated metrics: iou, jiou.
    #[arg(long, global = true)]
    metric: Option<String>,
    /// Comma-separated thresholds in [0, 1].
    #[arg(long, global = true)]
    thresholds: Option<String>,
    /// pg or pdq.
    #[arg(long, global = true)]
    density: Option<String>,
    /// Object to render, `frame:index`.
    #[arg(long, global = true)]
    object: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long = "num-frames", default_value_t = 4)]
    num_frames: usize,
    #[arg(long, default_value_t = 6)]
    cars: usize,
    #[arg(long = "points-per-car", default_value_t = 150)]
    points_per_car: usize,
    #[arg(long = "bad-fraction", default_value_t = 0.2)]
    bad_fraction: f64,
    /// Center noise of the detections in meters.
    #[arg(long = "center-sigma", default_value_t = 0.3)]
    center_sigma: f64,
    /// Emitted variances relative to the true noise; 0 emits none.
    #[arg(long = "variance-scale", default_value_t = 1.0)]
    variance_scale: f64,
}

impl Settings {
    fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("dataset", &self.dataset),
            ("frames", &self.frames),
            ("detections", &self.detections),
            ("labels", &self.labels),
            ("bad-labels", &self.bad_labels),
            ("weight", &self.weight),
            ("sigma", &self.sigma),
            ("resolution", &self.resolution),
            ("interior", &self.interior),
            ("samples", &self.samples),
            ("seed", &self.seed),
            ("class", &self.class),
            ("length-min", &self.length_min),
            ("length-max", &self.length_max),
            ("out", &self.out),
            ("report", &self.report),
            ("metric", &self.metric),
            ("thresholds", &self.thresholds),
            ("density", &self.density),
            ("object", &self.object),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.settings.to_config()?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut log = io::stderr();
    match &cli.command {
        Command::Infer => cmd_infer(&cfg, &mut out, &mut log)?,
        Command::Render => cmd_render(&cfg, &mut out, &mut log)?,
        Command::Jiou => cmd_jiou(&cfg, &mut out, &mut log)?,
        Command::Eval => cmd_eval(&cfg, &mut out, &mut log)?,
        Command::Synth(a) => {
            let defaults = SynthOptions::default();
            let opts = SynthOptions {
                frames: a.num_frames,
                frame: FrameSpec {
                    cars: a.cars,
                    points_per_car: a.points_per_car,
                    bad_fraction: a.bad_fraction,
                    ..defaults.frame
                },
                noise: NoiseSpec {
                    variance_scale: a.variance_scale,
                    ..NoiseSpec::center(a.center_sigma)
                },
            };
            cmd_synth(&cfg, &opts, &mut log)?
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
