use nalgebra::Point2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use probbox::eval::{
    alignment_ablation, l_shape_cloud, match_and_recall, random_car, synthesize_detections, EvalLabel, Metric,
    MetricOptions, NoiseSpec,
};
use probbox::geometry::{AlignMode, BoxParams};
use probbox::inference::{infer_object, InferenceSettings};
use probbox::spatial::ProbBox;

fn labels(n: usize, seed: u64) -> Vec<(String, String, BoxParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| (format!("{:06}", i / 8), "Car".to_string(), random_car(&mut rng, 40.0)))
        .collect()
}

fn deterministic(ls: &[(String, String, BoxParams)]) -> Vec<EvalLabel> {
    ls.iter().map(|(f, c, b)| EvalLabel::deterministic(f, c, *b)).collect()
}

/// Labels carrying the posterior inferred from a sparse L-shaped cloud.
fn sparse_labels(ls: &[(String, String, BoxParams)], points: usize, seed: u64) -> Vec<EvalLabel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ls.iter()
        .map(|(f, c, b)| {
            let pts = l_shape_cloud(b, &Point2::origin(), points, 0.05, &mut rng).unwrap();
            let post = infer_object(&pts, b, &InferenceSettings::default()).unwrap().posterior;
            EvalLabel {
                frame: f.clone(),
                class: c.clone(),
                bbox: *b,
                dist: ProbBox::Gaussian(post),
            }
        })
        .collect()
}

const THRESHOLDS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[test]
fn recall_is_non_increasing_for_both_metrics() {
    // Overlapping frames make the matching non-trivial.
    let ls = labels(120, 1);
    let dets = synthesize_detections(&ls, &NoiseSpec::center(0.3), 2).unwrap();
    for metric in [Metric::Iou, Metric::Jiou] {
        let curve = match_and_recall(&dets, &deterministic(&ls), metric, &THRESHOLDS, &MetricOptions::default()).unwrap();
        assert!(curve.windows(2).all(|w| w[1].recall <= w[0].recall), "{metric:?} {curve:?}");
        assert!(curve[0].recall > 0.95);
    }
}

#[test]
fn calibrated_variances_recall_at_least_zero_variances_on_sparse_labels() {
    let ls = labels(300, 1);
    let eval = sparse_labels(&ls, 10, 3);
    let calibrated = synthesize_detections(&ls, &NoiseSpec::center(0.3), 2).unwrap();
    let zero = NoiseSpec {
        variance_scale: 0.0,
        ..NoiseSpec::center(0.3)
    };
    let zero = synthesize_detections(&ls, &zero, 2).unwrap();
    let opts = MetricOptions::default();
    let a = match_and_recall(&calibrated, &eval, Metric::Jiou, &[0.7], &opts).unwrap();
    let b = match_and_recall(&zero, &eval, Metric::Jiou, &[0.7], &opts).unwrap();
    assert!(a[0].recall >= b[0].recall, "{a:?} vs {b:?}");
}

#[test]
fn corner_anchored_noise_favors_corner_alignment() {
    let ls = labels(200, 4);
    let spec = NoiseSpec {
        sigma: [0.0, 0.0, 0.5, 0.2, 0.0],
        anchor: AlignMode::Corner,
        variance_scale: 0.0,
        observer: Point2::origin(),
    };
    let dets = synthesize_detections(&ls, &spec, 5).unwrap();
    let r = alignment_ablation(&dets, &deterministic(&ls), 0.7, &Point2::origin()).unwrap();
    assert!(r.corner_delta() > r.center_delta(), "{r:?}");
    assert!((r.corner_aligned - 1.0).abs() < 1e-12);
}
