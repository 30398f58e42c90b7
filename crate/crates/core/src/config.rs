//! Run configuration: defaults, `key = value` files and flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data_io::LengthFilter;
use crate::error::{Error, Result};
use crate::eval::Metric;
use crate::inference::{SigmaMode, DEFAULT_SIGMA};
use crate::spatial::{RasterOptions, DEFAULT_RESOLUTION};

/// Which spatial density `render` writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Density {
    Pg,
    Pdq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Recall,
    Roc,
    CornerTv,
    Alignment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// `None` processes every frame in the dataset.
    pub frames: Option<Vec<String>>,
    pub detections: Option<PathBuf>,
    /// Per-object label distributions as written by `infer`.
    pub labels: Option<PathBuf>,
    /// Lines of `frame object` naming corrupted labels.
    pub bad_labels: Option<PathBuf>,
    /// Prior weights; `render` sweeps them, other commands need exactly one.
    pub weights: Vec<f64>,
    pub sigma: SigmaMode,
    pub resolution: f64,
    pub interior: (usize, usize),
    pub samples: usize,
    pub seed: u64,
    pub class: String,
    pub length: LengthFilter,
    /// Extra BEV margin around a label when collecting its points, in meters.
    pub margin: f64,
    /// Points this close above the box bottom count as ground, in meters.
    pub ground_clearance: f64,
    pub out: Option<PathBuf>,
    pub report: ReportKind,
    pub metrics: Vec<Metric>,
    pub thresholds: Vec<f64>,
    pub density: Density,
    /// `frame:object` for `render`.
    pub object: Option<(String, usize)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            frames: None,
            detections: None,
            labels: None,
            bad_labels: None,
            weights: vec![1.0],
            sigma: SigmaMode::Fixed(DEFAULT_SIGMA),
            resolution: DEFAULT_RESOLUTION,
            interior: (16, 16),
            samples: 1024,
            seed: 0,
            class: "Car".to_string(),
            length: LengthFilter::default(),
            margin: 0.2,
            ground_clearance: 0.2,
            out: None,
            report: ReportKind::Recall,
            metrics: vec![Metric::Iou, Metric::Jiou],
            thresholds: (1..=9).map(|i| i as f64 / 10.0).collect(),
            density: Density::Pg,
            object: None,
        }
    }
}

fn number(key: &'static str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::param(key, format!("`{value}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::param(key, "must be finite"));
    }
    Ok(v)
}

fn positive(key: &'static str, value: &str) -> Result<f64> {
    let v = number(key, value)?;
    if v <= 0.0 {
        return Err(Error::param(key, format!("must be positive, got {v}")));
    }
    Ok(v)
}

fn count(key: &'static str, value: &str) -> Result<usize> {
    match value.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::param(key, format!("`{value}` is not a positive integer"))),
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl RunConfig {
    /// Applies one setting. Keys are the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let path = || Some(PathBuf::from(value));
        match key {
            "dataset" => self.dataset = path(),
            "frames" => self.frames = Some(list(value).map(str::to_string).collect()),
            "detections" => self.detections = path(),
            "labels" => self.labels = path(),
            "bad-labels" => self.bad_labels = path(),
            "out" => self.out = path(),
            "weight" => {
                let weights = list(value).map(|v| positive("weight", v)).collect::<Result<Vec<_>>>()?;
                if weights.is_empty() {
                    return Err(Error::param("weight", "needs at least one value"));
                }
                self.weights = weights;
            }
            "sigma" => {
                self.sigma = if value == "em" {
                    SigmaMode::Em
                } else {
                    SigmaMode::Fixed(positive("sigma", value)?)
                }
            }
            "resolution" => self.resolution = positive("resolution", value)?,
            "interior" => {
                let (nx, ny) = value
                    .split_once('x')
                    .ok_or_else(|| Error::param("interior", format!("expected `NxM`, got `{value}`")))?;
                self.interior = (count("interior", nx)?, count("interior", ny)?);
            }
            "samples" => self.samples = count("samples", value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::param("seed", format!("`{value}` is not a non-negative integer")))?
            }
            "class" => self.class = value.to_string(),
            "length-min" => self.length.min = number("length-min", value)?,
            "length-max" => self.length.max = number("length-max", value)?,
            "margin" => {
                self.margin = number("margin", value)?;
                if self.margin < 0.0 {
                    return Err(Error::param("margin", "must be non-negative"));
                }
            }
            "ground-clearance" => self.ground_clearance = number("ground-clearance", value)?,
            "report" => {
                self.report = match value {
                    "recall" => ReportKind::Recall,
                    "roc" => ReportKind::Roc,
                    "corner-tv" => ReportKind::CornerTv,
                    "alignment" => ReportKind::Alignment,
                    other => {
                        return Err(Error::param(
                            "report",
                            format!("expected recall, roc, corner-tv or alignment, got `{other}`"),
                        ))
                    }
                }
            }
            "metric" => {
                let metrics = list(value).map(str::parse).collect::<Result<Vec<Metric>>>()?;
                if metrics.is_empty() {
                    return Err(Error::param("metric", "needs at least one value"));
                }
                self.metrics = metrics;
            }
            "thresholds" => {
                let t = list(value).map(|v| number("thresholds", v)).collect::<Result<Vec<_>>>()?;
                if t.is_empty() || t.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::param("thresholds", "needs values in [0, 1]"));
                }
                self.thresholds = t;
            }
            "density" => {
                self.density = match value {
                    "pg" => Density::Pg,
                    "pdq" => Density::Pdq,
                    other => return Err(Error::param("density", format!("expected pg or pdq, got `{other}`"))),
                }
            }
            "object" => {
                let parsed = value
                    .rsplit_once(':')
                    .and_then(|(f, i)| Some((f.to_string(), i.parse().ok()?)));
                self.object = Some(
                    parsed.ok_or_else(|| Error::param("object", format!("expected `frame:index`, got `{value}`")))?,
                );
            }
            _ => return Err(Error::Input(format!("unknown configuration key `{key}`"))),
        }
        self.check()
    }

    fn check(&self) -> Result<()> {
        if self.length.min > self.length.max {
            return Err(Error::param("length-min", "must not exceed length-max"));
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, context: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(context, i + 1, "expected `key = value`"))?;
            self.set(key.trim(), value).map_err(|e| Error::parse(context, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// The single prior weight for commands that do not sweep.
    pub fn weight(&self) -> Result<f64> {
        match self.weights.as_slice() {
            [w] => Ok(*w),
            _ => Err(Error::param("weight", "this command takes a single value")),
        }
    }

    pub fn raster(&self) -> RasterOptions {
        RasterOptions {
            interior: self.interior,
            samples: self.samples,
            seed: self.seed,
        }
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Input(format!("missing `--{key}`")))
    }
}
