//! Baseline label-quality scores and class/length filters.

use crate::geometry::{polygon_intersection, BoxParams, ConvexPolygon, AREA_EPS};
use crate::inference::ObjectPoints;

pub const DEFAULT_K_MAX: usize = 512;

/// IoU between the label's BEV rectangle and the convex hull of its points.
/// Zero for fewer than three points or a degenerate hull.
pub fn cvx_hull_iou(label: &BoxParams, points: &ObjectPoints) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let hull = ConvexPolygon::hull(&points.points);
    let hull_area = hull.area();
    if hull_area < AREA_EPS {
        return 0.0;
    }
    let inter = polygon_intersection(&ConvexPolygon::from_box(label), &hull).area();
    let union = label.area_bev() + hull_area - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// `min(K / k_max, 1)`.
pub fn num_points_score(points: &ObjectPoints, k_max: usize) -> f64 {
    (points.len() as f64 / k_max.max(1) as f64).min(1.0)
}

/// Keeps vehicles whose length lies in `[min, max]` meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthFilter {
    pub min: f64,
    pub max: f64,
}

impl Default for LengthFilter {
    fn default() -> Self {
        LengthFilter { min: 3.0, max: 6.5 }
    }
}

impl LengthFilter {
    pub fn accepts(&self, b: &BoxParams) -> bool {
        (self.min..=self.max).contains(&b.l)
    }
}

/// Class equality, where an empty filter accepts everything.
pub fn class_matches(filter: &str, class: &str) -> bool {
    filter.is_empty() || filter == class
}
