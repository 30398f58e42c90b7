//! Batch commands behind the command-line front end. Data goes to files or
//! `out`; progress and summaries go to `log`.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Point2;
use rayon::prelude::*;

use crate::config::{Density, ReportKind, RunConfig};
use crate::data_io::{
    class_matches, cvx_hull_iou, list_frames, load_frame, num_points_score, read_detections_jsonl, read_labels_jsonl,
    write_detections_jsonl, write_frame, write_labels_jsonl, DetectionRecord, FrameRecord, LabelRecord,
    DEFAULT_K_MAX,
};
use crate::error::{Error, Result};
use crate::eval::report::{fmt, write_text};
use crate::eval::{
    alignment_ablation, average_precision, corner_tv_report, greedy_match, label_quality_roc, line_plot_svg,
    match_and_recall, score_order, similarity_table, synthesize_detections, synthetic_frame, EvalLabel, FrameSpec,
    Metric, MetricOptions, NoiseSpec, Series, Table,
};
use crate::geometry::{iou_bev, BoxParams};
use crate::inference::{infer_object, segment_points, InferenceSettings, LabelPosterior, ObjectPoints};
use crate::jiou::{jiou_box_vs_posterior, jiou_distributions};
use crate::spatial::{covering_grid, GridSpec, MomentConfig, ProbBox};

/// A labeled object from the dataset with the points inside its footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetObject {
    pub frame: String,
    /// Index among the frame's labels, DontCare excluded.
    pub object: usize,
    pub class: String,
    pub label: BoxParams,
    pub points: ObjectPoints,
}

fn frame_ids(cfg: &RunConfig) -> Result<Vec<String>> {
    match &cfg.frames {
        Some(ids) => Ok(ids.clone()),
        None => list_frames(cfg.require(&cfg.dataset, "dataset")?),
    }
}

/// Points within the label footprint plus margin, above the ground band.
pub fn object_points(frame: &FrameRecord, label: &BoxParams, cfg: &RunConfig) -> Result<ObjectPoints> {
    let bottom = label.c3 - 0.5 * label.h + cfg.ground_clearance;
    let top = label.c3 + 0.5 * label.h + cfg.margin;
    let cloud = frame
        .points
        .iter()
        .map(|p| p.position())
        .filter(|p| p.z > bottom && p.z <= top);
    segment_points(cloud, label, cfg.margin)
}

/// Selected objects of every requested frame, in frame then label order.
pub fn dataset_objects(cfg: &RunConfig) -> Result<Vec<DatasetObject>> {
    let root = cfg.require(&cfg.dataset, "dataset")?;
    let ids = frame_ids(cfg)?;
    let frames: Vec<Vec<DatasetObject>> = ids
        .par_iter()
        .map(|id| -> Result<Vec<DatasetObject>> {
            let frame = load_frame(root, id)?;
            let mut objects = Vec::new();
            for (object, (class, label)) in frame.labels.iter().enumerate() {
                if !class_matches(&cfg.class, class) || !cfg.length.accepts(label) {
                    continue;
                }
                objects.push(DatasetObject {
                    frame: id.clone(),
                    object,
                    class: class.clone(),
                    label: *label,
                    points: object_points(&frame, label, cfg)?,
                });
            }
            Ok(objects)
        })
        .collect::<Result<_>>()?;
    Ok(frames.into_iter().flatten().collect())
}

fn settings(cfg: &RunConfig, weight: f64) -> InferenceSettings {
    InferenceSettings {
        weight,
        sigma: cfg.sigma,
        ..Default::default()
    }
}

fn infer_record(object: &DatasetObject, settings: &InferenceSettings) -> Result<LabelRecord> {
    let inference = infer_object(&object.points, &object.label, settings)?;
    let mut record = LabelRecord::from_posterior(&object.frame, object.object, &object.class, &inference.posterior);
    record.num_points = inference.num_points;
    record.sigma_em = inference.em.map(|e| e.sigma);
    Ok(record)
}

fn infer_records(cfg: &RunConfig) -> Result<Vec<LabelRecord>> {
    let settings = settings(cfg, cfg.weight()?);
    dataset_objects(cfg)?
        .par_iter()
        .map(|o| infer_record(o, &settings).map_err(|e| Error::Input(format!("frame {} object {}: {e}", o.frame, o.object))))
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

/// Writes to `--out` when given, else to `out`.
fn emit(cfg: &RunConfig, out: &mut dyn Write, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match &cfg.out {
        Some(path) => {
            let mut file = create(path)?;
            write(&mut file)?;
            file.flush().map_err(|e| Error::io(path, e))
        }
        None => write(out),
    }
}

/// Per-object posteriors as JSON lines.
pub fn cmd_infer(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let records = if frame_ids(cfg)?.is_empty() { Vec::new() } else { infer_records(cfg)? };
    emit(cfg, out, |w| write_labels_jsonl(w, &records))?;
    writeln!(log, "inferred {} objects", records.len())?;
    Ok(())
}

fn read_label_records(cfg: &RunConfig) -> Result<Vec<LabelRecord>> {
    match &cfg.labels {
        Some(path) => read_labels_jsonl(open(path)?).map_err(|e| with_context(path, e)),
        None => infer_records(cfg),
    }
}

fn with_context(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message, .. } => Error::Parse {
            context: path.display().to_string(),
            line,
            message,
        },
        other => other,
    }
}

fn eval_labels(cfg: &RunConfig) -> Result<(Vec<LabelRecord>, Vec<EvalLabel>)> {
    let records: Vec<LabelRecord> = read_label_records(cfg)?
        .into_iter()
        .filter(|r| class_matches(&cfg.class, &r.class))
        .collect();
    let labels = records
        .iter()
        .map(|r| {
            Ok(EvalLabel {
                frame: r.frame.clone(),
                class: r.class.clone(),
                bbox: r.mean,
                dist: r.distribution()?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((records, labels))
}

fn read_detections(cfg: &RunConfig) -> Result<Vec<DetectionRecord>> {
    let path = cfg.require(&cfg.detections, "detections")?;
    let dets = read_detections_jsonl(open(path)?).map_err(|e| with_context(path, e))?;
    Ok(dets.into_iter().filter(|d| class_matches(&cfg.class, &d.class)).collect())
}

fn metric_options(cfg: &RunConfig) -> MetricOptions {
    MetricOptions {
        resolution: cfg.resolution,
        raster: cfg.raster(),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.require(&cfg.out, "out")?.to_path_buf();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Spatial density grids of one object, one per prior weight.
pub fn cmd_render(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let (frame, object) = cfg
        .object
        .clone()
        .ok_or_else(|| Error::Input("missing `--object frame:index`".into()))?;
    let dists: Vec<(Option<f64>, ProbBox)> = match &cfg.labels {
        Some(path) => {
            let records = read_labels_jsonl(open(path)?).map_err(|e| with_context(path, e))?;
            let record = records
                .iter()
                .find(|r| r.frame == frame && r.object == object)
                .ok_or_else(|| Error::Input(format!("no object {object} in frame {frame} of {}", path.display())))?;
            vec![(None, record.distribution()?)]
        }
        None => {
            let cfg = RunConfig {
                frames: Some(vec![frame.clone()]),
                ..cfg.clone()
            };
            let target = dataset_objects(&cfg)?
                .into_iter()
                .find(|o| o.object == object)
                .ok_or_else(|| Error::Input(format!("no selected object {object} in frame {frame}")))?;
            cfg.weights
                .iter()
                .map(|&w| Ok((Some(w), ProbBox::Gaussian(infer_object(&target.points, &target.label, &settings(&cfg, w))?.posterior))))
                .collect::<Result<_>>()?
        }
    };
    // One lattice for the whole sweep so the grids are comparable.
    let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (_, d) in &dists {
        let s = d.covering_grid(cfg.resolution)?;
        min = min.inf(&s.origin);
        max = max.sup(&s.max_corner());
    }
    let spec = GridSpec::covering_rect(min, max, cfg.resolution)?;
    let dir = out_dir(cfg)?;
    let kind = match cfg.density {
        Density::Pg => "pg",
        Density::Pdq => "pdq",
    };
    for (weight, dist) in &dists {
        let grid = match cfg.density {
            Density::Pg => dist.rasterize_pg(&spec, &cfg.raster())?,
            Density::Pdq => dist.rasterize_pdq(&spec, cfg.samples, cfg.seed)?,
        };
        let stem = match weight {
            Some(w) => format!("{frame}_{object}_w{w}_{kind}"),
            None => format!("{frame}_{object}_{kind}"),
        };
        let csv = dir.join(format!("{stem}.csv"));
        let pgm = dir.join(format!("{stem}.pgm"));
        let mut f = create(&csv)?;
        grid.write_csv(&mut f)?;
        f.flush().map_err(|e| Error::io(&csv, e))?;
        let mut f = create(&pgm)?;
        grid.write_pgm(&mut f)?;
        f.flush().map_err(|e| Error::io(&pgm, e))?;
        let weight = weight.map_or("-".to_string(), |w| w.to_string());
        writeln!(
            out,
            "{} weight={weight} mass={:.4} entropy={:.4}",
            csv.display(),
            grid.mass(),
            grid.entropy()
        )?;
    }
    writeln!(log, "rendered {} grids of {}x{} cells", dists.len(), spec.width, spec.height)?;
    Ok(())
}

/// Per-detection IoU and JIoU against the greedily matched label.
pub fn cmd_jiou(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let detections = read_detections(cfg)?;
    let (records, labels) = eval_labels(cfg)?;
    let opts = metric_options(cfg);
    let table = similarity_table(&detections, &labels, Metric::Iou, &opts)?;
    // Any overlap qualifies; the highest-scoring detection claims a label first.
    let matches = greedy_match(&table, &score_order(&detections), f64::MIN_POSITIVE);
    let rows: Vec<Vec<String>> = detections
        .par_iter()
        .enumerate()
        .map(|(i, det)| -> Result<Vec<String>> {
            let mut row = vec![det.frame.clone(), i.to_string()];
            let Some(l) = matches.detection_label[i] else {
                row.extend([String::new(), fmt(det.score), fmt(0.0), fmt(0.0), String::new()]);
                return Ok(row);
            };
            let label = &labels[l];
            let point = ProbBox::Gaussian(LabelPosterior::deterministic(det.bbox));
            let label_uncertain = jiou_distributions(&point, &label.dist, opts.resolution, &opts.raster)?.value;
            let both = if det.is_probabilistic() {
                let dist = ProbBox::Gaussian(det.posterior()?);
                fmt(jiou_distributions(&dist, &label.dist, opts.resolution, &opts.raster)?.value)
            } else {
                String::new()
            };
            row.extend([
                records[l].object.to_string(),
                fmt(det.score),
                fmt(iou_bev(&det.bbox, &label.bbox)),
                fmt(label_uncertain),
                both,
            ]);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["frame", "detection", "label", "score", "iou", "jiou_label", "jiou_both"]);
    for row in rows {
        table.push(row);
    }
    emit(cfg, out, |w| Ok(w.write_all(table.to_csv().as_bytes())?))?;
    let matched = matches.detection_label.iter().filter(|m| m.is_some()).count();
    writeln!(log, "{} detections, {matched} matched to {} labels", detections.len(), labels.len())?;
    Ok(())
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Iou => "iou",
        Metric::Jiou => "jiou",
    }
}

fn write_plot(path: &Path, title: &str, x: &str, y: &str, series: &[Series]) -> Result<()> {
    write_text(path, &line_plot_svg(title, x, y, series))
}

fn report_recall(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let detections = read_detections(cfg)?;
    let (_, labels) = eval_labels(cfg)?;
    let opts = metric_options(cfg);
    let mut header = vec!["threshold".to_string()];
    let mut series = Vec::new();
    for &metric in &cfg.metrics {
        let curve = match_and_recall(&detections, &labels, metric, &cfg.thresholds, &opts)?;
        header.push(format!("recall_{}", metric_name(metric)));
        series.push(Series {
            name: metric_name(metric).to_string(),
            points: curve.iter().map(|p| (p.threshold, p.recall)).collect(),
        });
        let ap = average_precision(&detections, &labels, metric, 0.7, &opts)?;
        writeln!(out, "{} AP@0.7 = {:.4}", metric_name(metric), ap)?;
    }
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for (i, t) in cfg.thresholds.iter().enumerate() {
        let mut row = vec![fmt(*t)];
        row.extend(series.iter().map(|s| fmt(s.points[i].1)));
        table.push(row);
    }
    table.write(&dir.join("recall.csv"))?;
    write_plot(&dir.join("recall.svg"), "Recall", "threshold", "recall", &series)
}

fn report_alignment(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let detections = read_detections(cfg)?;
    let (_, labels) = eval_labels(cfg)?;
    let mut table = Table::new(&["threshold", "ap_origin", "ap_center", "ap_corner", "delta_center", "delta_corner"]);
    let mut center = Vec::new();
    let mut corner = Vec::new();
    for &t in &cfg.thresholds {
        let r = alignment_ablation(&detections, &labels, t, &Point2::origin())?;
        table.push(vec![
            fmt(t),
            fmt(r.origin),
            fmt(r.center_aligned),
            fmt(r.corner_aligned),
            fmt(r.center_delta()),
            fmt(r.corner_delta()),
        ]);
        center.push((t, r.center_delta()));
        corner.push((t, r.corner_delta()));
        writeln!(out, "threshold {t}: center {:+.4} corner {:+.4}", r.center_delta(), r.corner_delta())?;
    }
    table.write(&dir.join("alignment.csv"))?;
    let series = [
        Series {
            name: "center".into(),
            points: center,
        },
        Series {
            name: "corner".into(),
            points: corner,
        },
    ];
    write_plot(&dir.join("alignment.svg"), "AP change after alignment", "IoU threshold", "delta AP", &series)
}

fn report_corner_tv(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let objects: Vec<(BoxParams, ObjectPoints)> =
        dataset_objects(cfg)?.into_iter().map(|o| (o.label, o.points)).collect();
    let moments = MomentConfig::new(cfg.samples, cfg.seed);
    let r = corner_tv_report(&objects, &Point2::origin(), &settings(cfg, cfg.weight()?), &moments);
    let mut table = Table::new(&["point", "mean_total_variance"]);
    for (i, tv) in r.mean_corner.iter().enumerate() {
        table.push(vec![format!("C{}", i + 1), fmt(*tv)]);
    }
    table.push(vec!["center".into(), fmt(r.mean_center)]);
    table.write(&dir.join("corner_tv.csv"))?;
    let series = [Series {
        name: "corners".into(),
        points: r.mean_corner.iter().enumerate().map(|(i, tv)| ((i + 1) as f64, *tv)).collect(),
    }];
    write_plot(&dir.join("corner_tv.svg"), "Corner total variance", "corner rank", "mean TV (m^2)", &series)?;
    let tvs: Vec<String> = r.mean_corner.iter().map(|v| format!("{v:.5}")).collect();
    writeln!(
        out,
        "objects {} skipped {}; TV C1..C4 = {}; center {:.5}",
        r.objects,
        r.skipped,
        tvs.join(" "),
        r.mean_center
    )?;
    Ok(())
}

fn read_bad_labels(path: &Path) -> Result<BTreeSet<(String, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut set = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parsed = match (parts.next(), parts.next().map(str::parse::<usize>), parts.next()) {
            (Some(f), Some(Ok(o)), None) => Some((f.to_string(), o)),
            _ => None,
        };
        set.insert(parsed.ok_or_else(|| Error::parse(path.display().to_string(), i + 1, "expected `frame object`"))?);
    }
    Ok(set)
}

/// Label quality scores in `[0, 1]`, higher meaning better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScores {
    pub jiou_gt: f64,
    pub cvx_hull_iou: f64,
    pub num_points: f64,
}

pub fn quality_scores(object: &DatasetObject, cfg: &RunConfig) -> Result<QualityScores> {
    let posterior = infer_object(&object.points, &object.label, &settings(cfg, cfg.weight()?))?.posterior;
    let spec = covering_grid(&posterior, cfg.resolution)?;
    Ok(QualityScores {
        jiou_gt: jiou_box_vs_posterior(&object.label, &posterior, &spec, &cfg.raster())?.value,
        cvx_hull_iou: cvx_hull_iou(&object.label, &object.points),
        num_points: num_points_score(&object.points, DEFAULT_K_MAX),
    })
}

fn report_roc(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let bad = read_bad_labels(cfg.require(&cfg.bad_labels, "bad-labels")?)?;
    let objects = dataset_objects(cfg)?;
    let scores: Vec<QualityScores> = objects.par_iter().map(|o| quality_scores(o, cfg)).collect::<Result<_>>()?;
    let flags: Vec<bool> = objects.iter().map(|o| bad.contains(&(o.frame.clone(), o.object))).collect();
    type Score = fn(&QualityScores) -> f64;
    let methods: [(&str, Score); 3] = [
        ("jiou-gt", |s| s.jiou_gt),
        ("cvx-hull-iou", |s| s.cvx_hull_iou),
        ("num-points", |s| s.num_points),
    ];
    let mut points = Table::new(&["method", "threshold", "tpr", "fpr"]);
    let mut aucs = Table::new(&["method", "auc"]);
    let mut series = Vec::new();
    for (name, score) in methods {
        let values: Vec<f64> = scores.iter().map(score).collect();
        let roc = label_quality_roc(&values, &flags)?;
        for p in &roc.points {
            points.push(vec![name.into(), fmt(p.threshold), fmt(p.true_positive_rate), fmt(p.false_positive_rate)]);
        }
        aucs.push(vec![name.into(), fmt(roc.auc)]);
        writeln!(out, "{name} AUC = {:.4}", roc.auc)?;
        series.push(Series {
            name: name.into(),
            points: roc.points.iter().map(|p| (p.false_positive_rate, p.true_positive_rate)).collect(),
        });
    }
    points.write(&dir.join("roc.csv"))?;
    aucs.write(&dir.join("roc_auc.csv"))?;
    write_plot(&dir.join("roc.svg"), "Bad label detection", "false positive rate", "true positive rate", &series)
}

pub fn cmd_eval(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let dir = out_dir(cfg)?;
    match cfg.report {
        ReportKind::Recall => report_recall(cfg, &dir, out)?,
        ReportKind::Alignment => report_alignment(cfg, &dir, out)?,
        ReportKind::CornerTv => report_corner_tv(cfg, &dir, out)?,
        ReportKind::Roc => report_roc(cfg, &dir, out)?,
    }
    writeln!(log, "report written to {}", dir.display())?;
    Ok(())
}

/// Options of the synthetic dataset generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub frames: usize,
    pub frame: FrameSpec,
    /// Noise of the emitted detections.
    pub noise: NoiseSpec,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            frames: 4,
            frame: FrameSpec {
                bad_fraction: 0.2,
                ..Default::default()
            },
            noise: NoiseSpec::center(0.3),
        }
    }
}

/// Writes a KITTI-layout dataset, `detections.jsonl` and `bad_labels.txt`
/// under `--out`.
pub fn cmd_synth(cfg: &RunConfig, opts: &SynthOptions, log: &mut dyn Write) -> Result<()> {
    let dir = out_dir(cfg)?;
    let frames: Vec<_> = (0..opts.frames)
        .into_par_iter()
        .map(|i| synthetic_frame(&format!("{i:06}"), &opts.frame, cfg.seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let mut bad = String::new();
    let mut truth = Vec::new();
    for f in &frames {
        write_frame(&dir, &f.frame)?;
        for (i, (b, is_bad)) in f.truth.iter().zip(&f.bad).enumerate() {
            if *is_bad {
                bad.push_str(&format!("{} {i}\n", f.frame.id));
            }
            truth.push((f.frame.id.clone(), "Car".to_string(), *b));
        }
    }
    write_text(&dir.join("bad_labels.txt"), &bad)?;
    let dets = synthesize_detections(&truth, &opts.noise, cfg.seed)?;
    let path = dir.join("detections.jsonl");
    let mut f = create(&path)?;
    write_detections_jsonl(&mut f, &dets)?;
    f.flush().map_err(|e| Error::io(&path, e))?;
    writeln!(log, "wrote {} frames with {} objects to {}", frames.len(), truth.len(), dir.display())?;
    Ok(())
}
