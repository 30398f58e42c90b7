use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::Point2;
use rayon::prelude::*;

use crate::data_io::DetectionRecord;
use crate::error::{Error, Result};
use crate::geometry::{align_box, iou_bev, AlignMode, BoxParams};
use crate::inference::LabelPosterior;
use crate::jiou::jiou_distributions;
use crate::spatial::{GridSpec, ProbBox, RasterOptions, DEFAULT_RESOLUTION};

/// Number of recall sample points in AP.
pub const AP_POINTS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Iou,
    Jiou,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iou" => Ok(Metric::Iou),
            "jiou" => Ok(Metric::Jiou),
            other => Err(Error::param("metric", format!("expected `iou` or `jiou`, got `{other}`"))),
        }
    }
}

/// A ground-truth object with its label distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalLabel {
    pub frame: String,
    pub class: String,
    pub bbox: BoxParams,
    pub dist: ProbBox,
}

impl EvalLabel {
    pub fn deterministic(frame: &str, class: &str, bbox: BoxParams) -> Self {
        EvalLabel {
            frame: frame.to_string(),
            class: class.to_string(),
            bbox,
            dist: ProbBox::Gaussian(LabelPosterior::deterministic(bbox)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    pub resolution: f64,
    pub raster: RasterOptions,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            resolution: DEFAULT_RESOLUTION,
            raster: RasterOptions::default(),
        }
    }
}

/// Metric value of every detection against the labels of its frame that it
/// can overlap. Pairs that cannot overlap are absent and count as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    pub entries: Vec<Vec<(usize, f64)>>,
    pub num_labels: usize,
}

fn labels_by_frame(labels: &[EvalLabel]) -> BTreeMap<&str, Vec<usize>> {
    let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        map.entry(l.frame.as_str()).or_default().push(i);
    }
    map
}

fn rects_overlap(a: &GridSpec, b: &GridSpec) -> bool {
    let (a0, a1, b0, b1) = (a.origin, a.max_corner(), b.origin, b.max_corner());
    a0.x < b1.x && b0.x < a1.x && a0.y < b1.y && b0.y < a1.y
}

pub fn similarity_table(
    detections: &[DetectionRecord],
    labels: &[EvalLabel],
    metric: Metric,
    opts: &MetricOptions,
) -> Result<SimilarityTable> {
    let by_frame = labels_by_frame(labels);
    let entries = detections
        .par_iter()
        .map(|det| -> Result<Vec<(usize, f64)>> {
            let Some(candidates) = by_frame.get(det.frame.as_str()) else {
                return Ok(Vec::new());
            };
            let det_dist = ProbBox::Gaussian(det.posterior()?);
            let det_cover = det_dist.covering_grid(opts.resolution)?;
            let mut row = Vec::new();
            for &li in candidates {
                let label = &labels[li];
                let value = match metric {
                    Metric::Iou => iou_bev(&det.bbox, &label.bbox),
                    Metric::Jiou => {
                        if !rects_overlap(&det_cover, &label.dist.covering_grid(opts.resolution)?) {
                            continue;
                        }
                        jiou_distributions(&det_dist, &label.dist, opts.resolution, &opts.raster)?.value
                    }
                };
                if value > 0.0 {
                    row.push((li, value));
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityTable {
        entries,
        num_labels: labels.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub detection_label: Vec<Option<usize>>,
    /// Value with the matched label, or the best value over the frame's labels when unmatched.
    pub detection_value: Vec<f64>,
    pub label_detection: Vec<Option<usize>>,
}

impl MatchResult {
    pub fn recall(&self) -> f64 {
        let matched = self.label_detection.iter().filter(|m| m.is_some()).count();
        matched as f64 / self.label_detection.len().max(1) as f64
    }
}

/// Detection indices by descending score; equal scores keep input order.
pub fn score_order(detections: &[DetectionRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score));
    order
}

/// Greedy matching in score order: each detection takes the unmatched label
/// with the highest value, if that value reaches `threshold`. Ties go to the
/// lower label index.
pub fn greedy_match(table: &SimilarityTable, order: &[usize], threshold: f64) -> MatchResult {
    let n = table.entries.len();
    let mut result = MatchResult {
        detection_label: vec![None; n],
        detection_value: vec![0.0; n],
        label_detection: vec![None; table.num_labels],
    };
    for &d in order {
        let mut best: Option<(usize, f64)> = None;
        for &(l, v) in &table.entries[d] {
            result.detection_value[d] = result.detection_value[d].max(v);
            if result.label_detection[l].is_some() {
                continue;
            }
            if best.is_none_or(|(bl, bv)| v > bv || (v == bv && l < bl)) {
                best = Some((l, v));
            }
        }
        if let Some((l, v)) = best.filter(|&(_, v)| v >= threshold) {
            result.detection_label[d] = Some(l);
            result.detection_value[d] = v;
            result.label_detection[l] = Some(d);
        }
    }
    result
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecallPoint {
    pub threshold: f64,
    pub recall: f64,
}

pub fn recall_curve(table: &SimilarityTable, order: &[usize], thresholds: &[f64]) -> Result<Vec<RecallPoint>> {
    if table.num_labels == 0 {
        return Err(Error::Input("recall needs at least one label".into()));
    }
    Ok(thresholds
        .iter()
        .map(|&threshold| RecallPoint {
            threshold,
            recall: greedy_match(table, order, threshold).recall(),
        })
        .collect())
}

pub fn match_and_recall(
    detections: &[DetectionRecord],
    labels: &[EvalLabel],
    metric: Metric,
    thresholds: &[f64],
    opts: &MetricOptions,
) -> Result<Vec<RecallPoint>> {
    if labels.is_empty() {
        return Err(Error::Input("recall needs at least one label".into()));
    }
    let table = similarity_table(detections, labels, metric, opts)?;
    recall_curve(&table, &score_order(detections), thresholds)
}

/// Interpolated AP over recall levels `1/40, ..., 1`.
pub fn ap_from_matches(result: &MatchResult, order: &[usize]) -> f64 {
    let total = result.label_detection.len();
    if total == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut curve = Vec::with_capacity(order.len());
    for (rank, &d) in order.iter().enumerate() {
        if result.detection_label[d].is_some() {
            tp += 1;
        }
        curve.push((tp as f64 / total as f64, tp as f64 / (rank + 1) as f64));
    }
    // Running maximum of precision from the right.
    for i in (0..curve.len().saturating_sub(1)).rev() {
        curve[i].1 = curve[i].1.max(curve[i + 1].1);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for i in 1..=AP_POINTS {
        let level = i as f64 / AP_POINTS as f64;
        while k < curve.len() && curve[k].0 < level - 1e-12 {
            k += 1;
        }
        if k < curve.len() {
            sum += curve[k].1;
        }
    }
    sum / AP_POINTS as f64
}

pub fn average_precision(
    detections: &[DetectionRecord],
    labels: &[EvalLabel],
    metric: Metric,
    threshold: f64,
    opts: &MetricOptions,
) -> Result<f64> {
    let table = similarity_table(detections, labels, metric, opts)?;
    let order = score_order(detections);
    Ok(ap_from_matches(&greedy_match(&table, &order, threshold), &order))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationReport {
    pub origin: f64,
    pub center_aligned: f64,
    pub corner_aligned: f64,
}

impl AblationReport {
    pub fn center_delta(&self) -> f64 {
        self.center_aligned - self.origin
    }

    pub fn corner_delta(&self) -> f64 {
        self.corner_aligned - self.origin
    }
}

/// BEV AP at `threshold` IoU before and after replacing each detection's
/// size by that of its highest-IoU label, keeping either its center or its
/// corner nearest to `observer`.
pub fn alignment_ablation(
    detections: &[DetectionRecord],
    labels: &[EvalLabel],
    threshold: f64,
    observer: &Point2<f64>,
) -> Result<AblationReport> {
    let opts = MetricOptions::default();
    let table = similarity_table(detections, labels, Metric::Iou, &opts)?;
    let aligned = |mode: AlignMode| -> Vec<DetectionRecord> {
        detections
            .iter()
            .zip(&table.entries)
            .map(|(det, row)| {
                let best = row
                    .iter()
                    .copied()
                    .fold(None::<(usize, f64)>, |acc, (l, v)| match acc {
                        Some((_, bv)) if bv >= v => acc,
                        _ => Some((l, v)),
                    });
                let mut out = det.clone();
                if let Some((l, _)) = best {
                    out.bbox = align_box(&det.bbox, &labels[l].bbox, mode, observer);
                }
                out
            })
            .collect()
    };
    let ap = |dets: &[DetectionRecord]| average_precision(dets, labels, Metric::Iou, threshold, &opts);
    Ok(AblationReport {
        origin: ap(detections)?,
        center_aligned: ap(&aligned(AlignMode::Center))?,
        corner_aligned: ap(&aligned(AlignMode::Corner))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn det(frame: &str, score: f64, b: BoxParams) -> DetectionRecord {
        DetectionRecord {
            frame: frame.into(),
            class: "Car".into(),
            score,
            bbox: b,
            var: None,
        }
    }

    fn boxes() -> Vec<BoxParams> {
        (0..3)
            .map(|i| BoxParams::bev(10.0 * i as f64, 0.0, 4.0, 2.0, 0.1).unwrap())
            .collect()
    }

    fn labels() -> Vec<EvalLabel> {
        boxes().iter().map(|b| EvalLabel::deterministic("f", "Car", *b)).collect()
    }

    #[test]
    fn exact_copies_recall_everything() {
        let dets: Vec<_> = boxes().into_iter().map(|b| det("f", 0.9, b)).collect();
        for metric in [Metric::Iou, Metric::Jiou] {
            let curve = match_and_recall(&dets, &labels(), metric, &[0.1, 0.5, 0.9, 0.97], &MetricOptions::default()).unwrap();
            assert!(curve.iter().all(|p| p.recall == 1.0), "{metric:?} {curve:?}");
        }
        let ap = average_precision(&dets, &labels(), Metric::Iou, 0.7, &MetricOptions::default()).unwrap();
        assert_abs_diff_eq!(ap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn no_detections_and_no_labels() {
        let curve = match_and_recall(&[], &labels(), Metric::Iou, &[0.5], &MetricOptions::default()).unwrap();
        assert_eq!(curve[0].recall, 0.0);
        assert!(match_and_recall(&[], &[], Metric::Iou, &[0.5], &MetricOptions::default()).is_err());
    }

    #[test]
    fn other_frames_never_match() {
        let dets: Vec<_> = boxes().into_iter().map(|b| det("g", 0.9, b)).collect();
        let curve = match_and_recall(&dets, &labels(), Metric::Iou, &[0.1], &MetricOptions::default()).unwrap();
        assert_eq!(curve[0].recall, 0.0);
    }

    #[test]
    fn all_false_positives() {
        let dets: Vec<_> = boxes().into_iter().map(|b| det("f", 0.9, BoxParams { c1: b.c1 + 100.0, ..b })).collect();
        let ap = average_precision(&dets, &labels(), Metric::Iou, 0.5, &MetricOptions::default()).unwrap();
        assert_eq!(ap, 0.0);
    }

    #[test]
    fn hand_computed_staircase() {
        // TP at 0.9, FP at 0.8, TP at 0.7 over two labels:
        // precision 1 up to recall 0.5, then 2/3 up to recall 1.
        let b = boxes();
        let labels: Vec<_> = b[..2].iter().map(|x| EvalLabel::deterministic("f", "Car", *x)).collect();
        let dets = vec![det("f", 0.9, b[0]), det("f", 0.8, b[2]), det("f", 0.7, b[1])];
        let ap = average_precision(&dets, &labels, Metric::Iou, 0.7, &MetricOptions::default()).unwrap();
        assert_abs_diff_eq!(ap, 5.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn greedy_prefers_higher_score() {
        let b = boxes()[0];
        let near = BoxParams { c1: b.c1 + 0.3, ..b };
        let dets = vec![det("f", 0.5, b), det("f", 0.9, near)];
        let labels = vec![EvalLabel::deterministic("f", "Car", b)];
        let table = similarity_table(&dets, &labels, Metric::Iou, &MetricOptions::default()).unwrap();
        let m = greedy_match(&table, &score_order(&dets), 0.5);
        assert_eq!(m.label_detection[0], Some(1));
        assert_eq!(m.detection_label, vec![None, Some(0)]);
        assert_abs_diff_eq!(m.detection_value[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn equal_scores_keep_input_order() {
        let b = boxes()[0];
        let dets = vec![det("f", 0.5, b), det("f", 0.5, b)];
        assert_eq!(score_order(&dets), vec![0, 1]);
    }

    #[test]
    fn ablation_is_zero_for_perfect_detections() {
        let dets: Vec<_> = boxes().into_iter().map(|b| det("f", 0.9, b)).collect();
        let r = alignment_ablation(&dets, &labels(), 0.7, &Point2::origin()).unwrap();
        assert_eq!((r.center_delta(), r.corner_delta()), (0.0, 0.0));
    }

    #[test]
    fn metric_names() {
        assert_eq!("jiou".parse::<Metric>().unwrap(), Metric::Jiou);
        assert!("giou".parse::<Metric>().is_err());
    }
}
