//! Rotated boxes, the unit-box transform, surface sampling and exact BEV IoU.
//!
//! All coordinates live in a right-handed ground frame: `x` forward, `y` left,
//! `z` up. Yaw rotates about `+z`. A box maps the unit cube `[-0.5, 0.5]^3`
//! onto the world through `R(yaw) * diag(l, w, h) * v0 + c`, with `v1` along
//! the length axis, `v2` along the width axis and `v3` along the height axis.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Point2, Point3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polygons below this area are treated as empty.
pub const AREA_EPS: f64 = 1e-12;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxParams {
    #[serde(rename = "cx")]
    pub c1: f64,
    #[serde(rename = "cy")]
    pub c2: f64,
    #[serde(rename = "cz", default)]
    pub c3: f64,
    pub l: f64,
    pub w: f64,
    #[serde(default = "unit_height")]
    pub h: f64,
    pub yaw: f64,
}

fn unit_height() -> f64 {
    1.0
}

impl BoxParams {
    pub fn new(c1: f64, c2: f64, c3: f64, l: f64, w: f64, h: f64, yaw: f64) -> Result<Self> {
        let b = BoxParams {
            c1,
            c2,
            c3,
            l,
            w,
            h,
            yaw: normalize_angle(yaw),
        };
        b.validate()?;
        Ok(b)
    }

    /// A bird's-eye-view box: `c3 = 0`, `h = 1`.
    pub fn bev(c1: f64, c2: f64, l: f64, w: f64, yaw: f64) -> Result<Self> {
        Self::new(c1, c2, 0.0, l, w, 1.0, yaw)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.c1, self.c2, self.c3, self.l, self.w, self.h, self.yaw];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite field in {self:?}")));
        }
        if self.l <= 0.0 || self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "dimensions must be positive (l={}, w={}, h={})",
                self.l, self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::new(self.c1, self.c2, self.c3)
    }

    pub fn center_bev(&self) -> Point2<f64> {
        Point2::new(self.c1, self.c2)
    }

    pub fn area_bev(&self) -> f64 {
        self.l * self.w
    }

    pub fn rotation_bev(&self) -> Matrix2<f64> {
        let (s, c) = self.yaw.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    /// BEV parameter vector `[c1, c2, l, w, yaw]`.
    pub fn bev_vector(&self) -> [f64; 5] {
        [self.c1, self.c2, self.l, self.w, self.yaw]
    }

    /// Replaces the BEV parameters, keeping `c3` and `h`. No validation.
    pub fn with_bev_vector(&self, p: &[f64; 5]) -> Self {
        BoxParams {
            c1: p[0],
            c2: p[1],
            l: p[2],
            w: p[3],
            yaw: p[4],
            ..*self
        }
    }

    /// Expresses a world BEV point in the box's local (length, width) frame, in meters.
    pub fn to_local_bev(&self, p: &Point2<f64>) -> Vector2<f64> {
        self.rotation_bev().transpose() * (p - self.center_bev())
    }

    pub fn contains_bev(&self, p: &Point2<f64>) -> bool {
        let q = self.to_local_bev(p);
        q.x.abs() <= 0.5 * self.l && q.y.abs() <= 0.5 * self.w
    }

    /// Radius of the circumscribed BEV circle.
    pub fn radius_bev(&self) -> f64 {
        0.5 * self.l.hypot(self.w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitPoint {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

impl UnitPoint {
    pub fn new(v1: f64, v2: f64, v3: f64) -> Self {
        debug_assert!(
            [v1, v2, v3].iter().all(|v| v.abs() <= 0.5 + 1e-12),
            "unit point outside [-0.5, 0.5]^3"
        );
        UnitPoint { v1, v2, v3 }
    }

    pub fn bev(v1: f64, v2: f64) -> Self {
        Self::new(v1, v2, 0.0)
    }

    pub const CENTER: UnitPoint = UnitPoint {
        v1: 0.0,
        v2: 0.0,
        v3: 0.0,
    };
}

/// `R(yaw) * diag(l, w, h) * v0 + c`.
pub fn box_to_world(b: &BoxParams, v0: &UnitPoint) -> Point3<f64> {
    let (s, c) = b.yaw.sin_cos();
    let a = b.l * v0.v1;
    let d = b.w * v0.v2;
    Point3::new(
        b.c1 + c * a - s * d,
        b.c2 + s * a + c * d,
        b.c3 + b.h * v0.v3,
    )
}

pub fn box_to_world_bev(b: &BoxParams, v0: &UnitPoint) -> Point2<f64> {
    let p = box_to_world(b, v0);
    Point2::new(p.x, p.y)
}

/// Unit-box coordinates of the four BEV corners, counterclockwise,
/// starting at rear-right.
pub const CORNERS_UNIT: [(f64, f64); 4] = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];

pub fn box_corners_bev(b: &BoxParams) -> [Point2<f64>; 4] {
    CORNERS_UNIT.map(|(v1, v2)| box_to_world_bev(b, &UnitPoint::bev(v1, v2)))
}

/// Index into [`CORNERS_UNIT`] of the corner closest to `observer`.
pub fn nearest_corner(b: &BoxParams, observer: &Point2<f64>) -> usize {
    let corners = box_corners_bev(b);
    let mut best = 0;
    for i in 1..4 {
        if (corners[i] - observer).norm_squared() < (corners[best] - observer).norm_squared() {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon {
    pub vertices: Vec<Point2<f64>>,
}

fn cross(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

impl ConvexPolygon {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Wraps counterclockwise vertices, dropping consecutive duplicates.
    pub fn new(vertices: Vec<Point2<f64>>) -> Self {
        let mut out: Vec<Point2<f64>> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if out.last().is_none_or(|last| (last - v).norm() > 1e-12) {
                out.push(v);
            }
        }
        while out.len() > 1 && (out[0] - out[out.len() - 1]).norm() <= 1e-12 {
            out.pop();
        }
        ConvexPolygon { vertices: out }
    }

    pub fn from_box(b: &BoxParams) -> Self {
        ConvexPolygon {
            vertices: box_corners_bev(b).to_vec(),
        }
    }

    /// Convex hull by Andrew's monotone chain. Collinear points are dropped.
    pub fn hull(points: &[Point2<f64>]) -> Self {
        let mut pts: Vec<Point2<f64>> = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup_by(|a, b| (*a - *b).norm() <= 1e-12);
        if pts.len() < 3 {
            return ConvexPolygon::new(pts);
        }
        let mut lower: Vec<Point2<f64>> = Vec::new();
        for p in &pts {
            while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(*p);
        }
        let mut upper: Vec<Point2<f64>> = Vec::new();
        for p in pts.iter().rev() {
            while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(*p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        ConvexPolygon::new(lower)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Shoelace area; zero for fewer than three vertices.
    pub fn area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let n = self.vertices.len();
        let mut twice = 0.0;
        for i in 0..n {
            let a = &self.vertices[i];
            let b = &self.vertices[(i + 1) % n];
            twice += a.x * b.y - b.x * a.y;
        }
        0.5 * twice.abs()
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        if self.is_empty() {
            return false;
        }
        let n = self.vertices.len();
        (0..n).all(|i| cross(&self.vertices[i], &self.vertices[(i + 1) % n], p) >= -1e-12)
    }
}

/// Sutherland-Hodgman clipping of two convex counterclockwise polygons.
pub fn polygon_intersection(a: &ConvexPolygon, b: &ConvexPolygon) -> ConvexPolygon {
    if a.is_empty() || b.is_empty() {
        return ConvexPolygon::empty();
    }
    let mut output = a.vertices.clone();
    let m = b.vertices.len();
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let e0 = b.vertices[i];
        let e1 = b.vertices[(i + 1) % m];
        let input = std::mem::take(&mut output);
        let n = input.len();
        for k in 0..n {
            let cur = input[k];
            let prev = input[(k + n - 1) % n];
            let cur_in = cross(&e0, &e1, &cur) >= 0.0;
            let prev_in = cross(&e0, &e1, &prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(segment_line_intersection(&prev, &cur, &e0, &e1));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_line_intersection(&prev, &cur, &e0, &e1));
            }
        }
    }
    let poly = ConvexPolygon::new(output);
    if poly.is_empty() {
        ConvexPolygon::empty()
    } else {
        poly
    }
}

fn segment_line_intersection(
    p: &Point2<f64>,
    q: &Point2<f64>,
    e0: &Point2<f64>,
    e1: &Point2<f64>,
) -> Point2<f64> {
    let dp = cross(e0, e1, p);
    let dq = cross(e0, e1, q);
    let t = dp / (dp - dq);
    p + (q - p) * t
}

/// Exact BEV intersection-over-union of two rotated rectangles.
pub fn iou_bev(a: &BoxParams, b: &BoxParams) -> f64 {
    let inter = polygon_intersection(&ConvexPolygon::from_box(a), &ConvexPolygon::from_box(b)).area();
    if inter < AREA_EPS {
        return 0.0;
    }
    let union = a.area_bev() + b.area_bev() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Walks the BEV perimeter counterclockwise from the rear-left corner, one
/// point every `spacing` meters of arc length. The remainder arc is dropped.
pub fn sample_boundary_points(b: &BoxParams, spacing: f64) -> Result<Vec<UnitPoint>> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::param("spacing", format!("must be positive, got {spacing}")));
    }
    let perimeter = 2.0 * (b.l + b.w);
    if spacing >= perimeter {
        return Err(Error::DegenerateModel(format!(
            "spacing {spacing} m is not below the perimeter {perimeter} m"
        )));
    }
    let count = ((perimeter / spacing) * (1.0 + 1e-12)).floor() as usize;
    // Edges as (start, end) in unit coordinates with their lengths in meters.
    let edges = [
        ((-0.5, 0.5), (-0.5, -0.5), b.w),
        ((-0.5, -0.5), (0.5, -0.5), b.l),
        ((0.5, -0.5), (0.5, 0.5), b.w),
        ((0.5, 0.5), (-0.5, 0.5), b.l),
    ];
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let mut s = i as f64 * spacing;
        let mut placed = false;
        for &((x0, y0), (x1, y1), len) in &edges {
            if s <= len {
                let t = s / len;
                points.push(UnitPoint::bev(x0 + t * (x1 - x0), y0 + t * (y1 - y0)));
                placed = true;
                break;
            }
            s -= len;
        }
        if !placed {
            points.push(UnitPoint::bev(-0.5, 0.5));
        }
    }
    Ok(points)
}

/// Cell centers of a regular `nx x ny` grid over the unit square.
pub fn sample_interior_points(nx: usize, ny: usize) -> Result<Vec<UnitPoint>> {
    if nx == 0 || ny == 0 {
        return Err(Error::param("interior grid", "nx and ny must be at least 1"));
    }
    let mut points = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let v2 = (j as f64 + 0.5) / ny as f64 - 0.5;
        for i in 0..nx {
            let v1 = (i as f64 + 0.5) / nx as f64 - 0.5;
            points.push(UnitPoint::bev(v1, v2));
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    Center,
    Corner,
}

/// Takes the ground-truth size and the predicted yaw. `Center` keeps the
/// predicted center; `Corner` keeps the predicted corner nearest to `observer`.
pub fn align_box(pred: &BoxParams, gt: &BoxParams, mode: AlignMode, observer: &Point2<f64>) -> BoxParams {
    let mut out = BoxParams {
        l: gt.l,
        w: gt.w,
        h: gt.h,
        ..*pred
    };
    if mode == AlignMode::Corner {
        let idx = nearest_corner(pred, observer);
        let anchor = box_corners_bev(pred)[idx];
        let (u1, u2) = CORNERS_UNIT[idx];
        let offset = pred.rotation_bev() * Vector2::new(u1 * gt.l, u2 * gt.w);
        out.c1 = anchor.x - offset.x;
        out.c2 = anchor.y - offset.y;
    }
    out
}

/// World BEV point at a local `(length, width)` offset from the box center, in meters.
pub fn local_to_world_bev(b: &BoxParams, local: &Vector2<f64>) -> Point2<f64> {
    b.center_bev() + b.rotation_bev() * local
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use nalgebra::Vector3;

    fn unit() -> BoxParams {
        BoxParams::bev(0.0, 0.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn identity_transform() {
        let b = BoxParams::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let p = box_to_world(&b, &UnitPoint::new(0.5, 0.5, 0.5));
        assert_eq!(p, Point3::new(0.5, 0.5, 0.5));
    }

    #[test]
    fn quarter_turn() {
        let b = BoxParams::bev(0.0, 0.0, 4.0, 2.0, PI / 2.0).unwrap();
        let p = box_to_world_bev(&b, &UnitPoint::bev(0.5, 0.0));
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn yaw_normalization() {
        assert_abs_diff_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-0.5), -0.5, epsilon = 1e-15);
        assert!(BoxParams::bev(0.0, 0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn corners() {
        let c = box_corners_bev(&unit());
        let expected = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
        for (p, e) in c.iter().zip(expected) {
            assert_abs_diff_eq!(p.x, e.0, epsilon = 1e-15);
            assert_abs_diff_eq!(p.y, e.1, epsilon = 1e-15);
        }
        let b = BoxParams::bev(0.0, 0.0, 4.0, 2.0, 0.0).unwrap();
        for p in box_corners_bev(&b) {
            assert_eq!((p.x.abs(), p.y.abs()), (2.0, 1.0));
        }
        let r = BoxParams::bev(0.0, 0.0, 1.0, 1.0, PI / 4.0).unwrap();
        for p in box_corners_bev(&r) {
            assert_abs_diff_eq!(p.coords.norm(), 2f64.sqrt() / 2.0, epsilon = 1e-12);
        }
        assert!(ConvexPolygon::from_box(&r).area() > 0.0);
    }

    #[test]
    fn intersection_cases() {
        let a = ConvexPolygon::from_box(&unit());
        let same = polygon_intersection(&a, &a);
        assert_abs_diff_eq!(same.area(), 1.0, epsilon = 1e-12);
        assert_eq!(same.vertices.len(), 4);

        let b = ConvexPolygon::from_box(&BoxParams::bev(0.5, 0.0, 1.0, 1.0, 0.0).unwrap());
        assert_abs_diff_eq!(polygon_intersection(&a, &b).area(), 0.5, epsilon = 1e-12);

        let far = ConvexPolygon::from_box(&BoxParams::bev(5.0, 0.0, 1.0, 1.0, 0.0).unwrap());
        let none = polygon_intersection(&a, &far);
        assert!(none.is_empty());
        assert_eq!(none.vertices.len(), 0);
    }

    #[test]
    fn rotated_square_matches_hit_test() {
        // Hit-test oracle on a 1000 x 1000 lattice (10^6 samples).
        let a = unit();
        let r = BoxParams::bev(0.0, 0.0, 1.0, 1.0, PI / 4.0).unwrap();
        let area = polygon_intersection(&ConvexPolygon::from_box(&a), &ConvexPolygon::from_box(&r)).area();
        let n = 1000;
        let mut hits = 0usize;
        for i in 0..n {
            for j in 0..n {
                let p = Point2::new(
                    (i as f64 + 0.5) / n as f64 - 0.5,
                    (j as f64 + 0.5) / n as f64 - 0.5,
                );
                if r.contains_bev(&p) {
                    hits += 1;
                }
            }
        }
        let mc = hits as f64 / (n * n) as f64;
        assert!((area - mc).abs() < 1e-3, "clip {area} vs hit-test {mc}");
        assert_abs_diff_eq!(area, 2.0 * (2f64.sqrt() - 1.0), epsilon = 1e-12);
    }

    #[test]
    fn iou_cases() {
        let a = unit();
        assert_abs_diff_eq!(iou_bev(&a, &a), 1.0, epsilon = 1e-12);
        let far = BoxParams::bev(3.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(iou_bev(&a, &far), 0.0);
        let off = BoxParams::bev(0.5, 0.0, 1.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(iou_bev(&a, &off), 1.0 / 3.0, epsilon = 1e-12);
        let flipped = BoxParams::bev(0.0, 0.0, 1.0, 1.0, PI).unwrap();
        assert_abs_diff_eq!(iou_bev(&a, &flipped), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn boundary_walk() {
        let b = BoxParams::bev(0.0, 0.0, 4.0, 2.0, 0.3).unwrap();
        let pts = sample_boundary_points(&b, 0.5).unwrap();
        assert_eq!(pts.len(), 24);
        assert_eq!(pts[0], UnitPoint::bev(-0.5, 0.5));
        for p in &pts {
            assert_abs_diff_eq!(p.v1.abs().max(p.v2.abs()), 0.5, epsilon = 1e-12);
        }
        let u = sample_boundary_points(&unit(), 1.0).unwrap();
        assert_eq!(u.len(), 4);
        let expected = [(-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5), (0.5, 0.5)];
        for (p, e) in u.iter().zip(expected) {
            assert_abs_diff_eq!(p.v1, e.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p.v2, e.1, epsilon = 1e-12);
        }
        assert!(sample_boundary_points(&unit(), 4.0).is_err());
        assert!(sample_boundary_points(&unit(), 0.0).is_err());
    }

    #[test]
    fn interior_grid() {
        assert_eq!(sample_interior_points(1, 1).unwrap(), vec![UnitPoint::CENTER]);
        let four = sample_interior_points(2, 2).unwrap();
        for p in &four {
            assert_eq!((p.v1.abs(), p.v2.abs()), (0.25, 0.25));
        }
        let hundred = sample_interior_points(10, 10).unwrap();
        let (s1, s2) = hundred.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.v1, acc.1 + p.v2));
        assert!(s1.abs() / 100.0 < 1e-12 && s2.abs() / 100.0 < 1e-12);
        assert!(sample_interior_points(0, 3).is_err());
    }

    #[test]
    fn alignment() {
        let observer = Point2::origin();
        let gt = BoxParams::bev(10.0, 3.0, 4.0, 2.0, 0.1).unwrap();
        for mode in [AlignMode::Center, AlignMode::Corner] {
            let out = align_box(&gt, &gt, mode, &observer);
            assert_abs_diff_eq!(out.c1, gt.c1, epsilon = 1e-12);
            assert_abs_diff_eq!(out.c2, gt.c2, epsilon = 1e-12);
        }
        let pred = BoxParams::bev(1.0, 0.0, 3.0, 1.0, 0.0).unwrap();
        let out = align_box(&pred, &BoxParams::bev(7.0, 7.0, 4.0, 2.0, 1.0).unwrap(), AlignMode::Center, &observer);
        assert_eq!((out.c1, out.c2, out.l, out.w, out.yaw), (1.0, 0.0, 4.0, 2.0, 0.0));

        let shifted = BoxParams::bev(10.4, 2.7, 4.6, 1.7, 0.15).unwrap();
        let out = align_box(&shifted, &gt, AlignMode::Corner, &observer);
        let k = nearest_corner(&shifted, &observer);
        assert_eq!(nearest_corner(&out, &observer), k);
        let a = box_corners_bev(&shifted)[k];
        let b = box_corners_bev(&out)[k];
        assert_abs_diff_eq!(a.x, b.x, epsilon = 1e-12);
        assert_abs_diff_eq!(a.y, b.y, epsilon = 1e-12);
        assert_eq!((out.l, out.w, out.h), (gt.l, gt.w, gt.h));
    }

    fn arb_box() -> impl Strategy<Value = BoxParams> {
        (-20.0..20.0f64, -20.0..20.0f64, 0.5..6.0f64, 0.5..3.0f64, -PI..PI)
            .prop_map(|(x, y, l, w, yaw)| BoxParams::bev(x, y, l, w, yaw).unwrap())
    }

    proptest! {
        #[test]
        fn stepwise_transform_oracle(b in arb_box(), c3 in -2.0..2.0f64, h in 0.5..3.0f64,
                                     v1 in -0.5..0.5f64, v2 in -0.5..0.5f64, v3 in -0.5..0.5f64) {
            let b = BoxParams { c3, h, ..b };
            // scale, then rotate, then translate, each as a separate step
            let scaled = Vector3::new(b.l * v1, b.w * v2, b.h * v3);
            let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), b.yaw);
            let rotated = rot * scaled;
            let expected = rotated + Vector3::new(b.c1, b.c2, b.c3);
            let got = box_to_world(&b, &UnitPoint::new(v1, v2, v3));
            prop_assert!((got.coords - expected).norm() < 1e-12);
            prop_assert_eq!(box_to_world(&b, &UnitPoint::CENTER), b.center());
        }

        #[test]
        fn iou_symmetric_and_rigid(a in arb_box(), b in arb_box(), t in -10.0..10.0f64, r in -PI..PI) {
            let ab = iou_bev(&a, &b);
            prop_assert!((ab - iou_bev(&b, &a)).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&ab));
            let mv = |x: &BoxParams| {
                let (s, c) = r.sin_cos();
                BoxParams::bev(c * x.c1 - s * x.c2 + t, s * x.c1 + c * x.c2 - t, x.l, x.w, x.yaw + r).unwrap()
            };
            prop_assert!((ab - iou_bev(&mv(&a), &mv(&b))).abs() < 1e-9);
        }

        #[test]
        fn intersection_bounded_by_inputs(a in arb_box(), b in arb_box()) {
            let pa = ConvexPolygon::from_box(&a);
            let pb = ConvexPolygon::from_box(&b);
            let inter = polygon_intersection(&pa, &pb).area();
            prop_assert!(inter <= pa.area().min(pb.area()) + 1e-9);
        }

        #[test]
        fn alignment_keeps_gt_size(p in arb_box(), g in arb_box(), corner in any::<bool>()) {
            let mode = if corner { AlignMode::Corner } else { AlignMode::Center };
            let out = align_box(&p, &g, mode, &Point2::origin());
            prop_assert_eq!((out.l, out.w, out.h), (g.l, g.w, g.h));
            prop_assert_eq!(out.yaw, p.yaw);
        }
    }
}
