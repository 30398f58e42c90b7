use nalgebra::Point2;
use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::BoxParams;
use crate::inference::{infer_object, InferenceSettings, ObjectPoints};
use crate::spatial::{corner_total_variance, CornerReport, MomentConfig};

/// Mean total variance per corner rank and of the center over objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerTvReport {
    /// Ranks C1 (nearest the observer) to C4.
    pub mean_corner: [f64; 4],
    pub mean_center: f64,
    pub objects: usize,
    /// Objects whose inference failed.
    pub skipped: usize,
}

/// Corner ranking of one object.
pub fn object_corner_report(
    label: &BoxParams,
    points: &ObjectPoints,
    observer: &Point2<f64>,
    settings: &InferenceSettings,
    moments: &MomentConfig,
) -> Result<CornerReport> {
    let inference = infer_object(points, label, settings)?;
    corner_total_variance(&inference.posterior, observer, moments)
}

/// Aggregates per-object corner reports. Sums run in input order.
pub fn corner_tv_report(
    objects: &[(BoxParams, ObjectPoints)],
    observer: &Point2<f64>,
    settings: &InferenceSettings,
    moments: &MomentConfig,
) -> CornerTvReport {
    let reports: Vec<Option<CornerReport>> = objects
        .par_iter()
        .map(|(label, points)| object_corner_report(label, points, observer, settings, moments).ok())
        .collect();
    let mut sums = [0.0; 4];
    let mut center = 0.0;
    let mut count = 0;
    for r in reports.iter().flatten() {
        for (s, c) in sums.iter_mut().zip(&r.corners) {
            *s += c.total_variance;
        }
        center += r.center_total_variance;
        count += 1;
    }
    let n = count.max(1) as f64;
    CornerTvReport {
        mean_corner: sums.map(|s| s / n),
        mean_center: center / n,
        objects: count,
        skipped: objects.len() - count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::synthetic::l_shape_cloud;
    use crate::inference::SigmaMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene() -> (Vec<(BoxParams, ObjectPoints)>, Point2<f64>) {
        let observer = Point2::new(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = BoxParams::bev(12.0, 5.0, 4.2, 1.8, 0.3).unwrap();
        let pts = l_shape_cloud(&b, &observer, 120, 0.05, &mut rng).unwrap();
        (vec![(b, pts)], observer)
    }

    #[test]
    fn l_shape_orders_corners() {
        let (objects, observer) = scene();
        let r = corner_tv_report(&objects, &observer, &InferenceSettings::default(), &MomentConfig::default());
        assert_eq!((r.objects, r.skipped), (1, 0));
        assert!(r.mean_corner[0] < r.mean_corner[3], "{r:?}");
    }

    #[test]
    fn translation_invariant() {
        let (objects, observer) = scene();
        let shift = |p: &Point2<f64>| Point2::new(p.x + 30.0, p.y - 7.0);
        let moved: Vec<_> = objects
            .iter()
            .map(|(b, pts)| {
                let b2 = BoxParams { c1: b.c1 + 30.0, c2: b.c2 - 7.0, ..*b };
                (b2, ObjectPoints::new(pts.points.iter().map(shift).collect()))
            })
            .collect();
        let cfg = MomentConfig::default();
        let a = corner_tv_report(&objects, &observer, &InferenceSettings::default(), &cfg);
        let b = corner_tv_report(&moved, &shift(&observer), &InferenceSettings::default(), &cfg);
        for (x, y) in a.mean_corner.iter().zip(&b.mean_corner) {
            assert!((x - y).abs() <= 1e-9 * x.max(1e-12), "{a:?} {b:?}");
        }
    }

    #[test]
    fn failed_inference_is_counted() {
        let (mut objects, observer) = scene();
        let bad = BoxParams { l: 0.0, ..objects[0].0 };
        objects.push((bad, ObjectPoints::new(Vec::new())));
        let settings = InferenceSettings {
            sigma: SigmaMode::Em,
            ..Default::default()
        };
        let r = corner_tv_report(&objects, &observer, &settings, &MomentConfig::default());
        assert_eq!((r.objects, r.skipped), (1, 1));
    }
}
