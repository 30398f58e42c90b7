//! Rasterization of box distributions onto BEV grids.
//!
//! `p_G` is the size-normalized density of the object's footprint, built as a
//! mixture of per-point Gaussians over interior unit-box nodes. `P_PDQ` is the
//! probability that a cell center lies inside a box drawn from the distribution.

use nalgebra::{Matrix2, Point2};
use rayon::prelude::*;

use super::grid::{GridSpec, SpatialGrid};
use super::moments::{linearized_bev_covariance, max_std, sample_boxes, sym_basis_moments, MomentConfig, DEFAULT_SAMPLES};
use crate::error::{Error, Result};
use crate::geometry::{box_corners_bev, polygon_intersection, sample_interior_points, BoxParams, ConvexPolygon, UnitPoint};
use crate::inference::LabelPosterior;

pub const DEFAULT_INTERIOR: (usize, usize) = (16, 16);
/// Minimum share of probability mass a grid must hold.
pub const MIN_CAPTURED: f64 = 0.99;
/// Gaussian kernels are evaluated out to this many standard deviations.
const KERNEL_WINDOW: f64 = 4.5;
const MAX_NODES_PER_AXIS: usize = 1024;
/// Grid margin around the mean footprint, in linearized corner standard deviations.
const COVER_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RasterOptions {
    /// Minimum interior node grid `(along length, along width)`.
    pub interior: (usize, usize),
    pub samples: usize,
    pub seed: u64,
}

impl Default for RasterOptions {
    fn default() -> Self {
        RasterOptions {
            interior: DEFAULT_INTERIOR,
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

/// Finite mixture of boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBoxDistribution {
    modes: Vec<(BoxParams, f64)>,
}

impl DiscreteBoxDistribution {
    /// Weights must be non-negative and sum to 1 within 1e-9.
    pub fn new(modes: Vec<(BoxParams, f64)>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for (b, weight) in &modes {
            b.validate()?;
            if !(*weight >= 0.0) || !weight.is_finite() {
                return Err(Error::param("weight", format!("must be non-negative, got {weight}")));
            }
        }
        let total: f64 = modes.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param("weight", format!("weights sum to {total}, expected 1")));
        }
        Ok(DiscreteBoxDistribution { modes })
    }

    pub fn single(b: BoxParams) -> Result<Self> {
        Self::new(vec![(b, 1.0)])
    }

    pub fn modes(&self) -> &[(BoxParams, f64)] {
        &self.modes
    }
}

/// Any box distribution that can be rendered.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ProbBox {
    Gaussian(LabelPosterior),
    Mixture(DiscreteBoxDistribution),
}

impl ProbBox {
    pub fn covering_grid(&self, resolution: f64) -> Result<GridSpec> {
        match self {
            ProbBox::Gaussian(p) => covering_grid(p, resolution),
            ProbBox::Mixture(d) => covering_boxes(d.modes.iter().map(|(b, _)| b), resolution),
        }
    }

    pub fn rasterize_pg(&self, spec: &GridSpec, opts: &RasterOptions) -> Result<SpatialGrid> {
        match self {
            ProbBox::Gaussian(p) => rasterize_pg(p, spec, opts),
            ProbBox::Mixture(d) => rasterize_discrete_pg(d, spec),
        }
    }

    pub fn rasterize_pdq(&self, spec: &GridSpec, samples: usize, seed: u64) -> Result<SpatialGrid> {
        match self {
            ProbBox::Gaussian(p) => rasterize_pdq(p, spec, samples, seed),
            ProbBox::Mixture(d) => rasterize_discrete_pdq(d, spec),
        }
    }
}

fn footprint_bounds<'a>(boxes: impl IntoIterator<Item = &'a BoxParams>) -> (Point2<f64>, Point2<f64>) {
    let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for b in boxes {
        for c in box_corners_bev(b) {
            min = min.inf(&c);
            max = max.sup(&c);
        }
    }
    (min, max)
}

fn inflate(min: Point2<f64>, max: Point2<f64>, margin: f64) -> (Point2<f64>, Point2<f64>) {
    (min.map(|v| v - margin), max.map(|v| v + margin))
}

/// Mean footprint inflated by three times the largest corner standard deviation.
pub fn covering_grid(posterior: &LabelPosterior, resolution: f64) -> Result<GridSpec> {
    let std = crate::geometry::CORNERS_UNIT
        .iter()
        .map(|&(v1, v2)| max_std(&linearized_bev_covariance(posterior, &UnitPoint::bev(v1, v2))))
        .fold(0.0, f64::max);
    let (min, max) = footprint_bounds([&posterior.mean]);
    let (min, max) = inflate(min, max, COVER_SIGMAS * std + resolution);
    GridSpec::covering_rect(min, max, resolution)
}

/// Union of the footprints plus one cell.
pub fn covering_boxes<'a>(boxes: impl IntoIterator<Item = &'a BoxParams>, resolution: f64) -> Result<GridSpec> {
    let (min, max) = footprint_bounds(boxes);
    if !min.x.is_finite() {
        return Err(Error::EmptyDistribution);
    }
    let (min, max) = inflate(min, max, resolution);
    GridSpec::covering_rect(min, max, resolution)
}

fn cell_polygon(spec: &GridSpec, ix: usize, iy: usize) -> ConvexPolygon {
    let r = spec.resolution;
    let x0 = spec.origin.x + ix as f64 * r;
    let y0 = spec.origin.y + iy as f64 * r;
    ConvexPolygon::new(vec![
        Point2::new(x0, y0),
        Point2::new(x0 + r, y0),
        Point2::new(x0 + r, y0 + r),
        Point2::new(x0, y0 + r),
    ])
}

fn grid_polygon(spec: &GridSpec) -> ConvexPolygon {
    let (a, b) = (spec.origin, spec.max_corner());
    ConvexPolygon::new(vec![a, Point2::new(b.x, a.y), b, Point2::new(a.x, b.y)])
}

fn too_small(captured: f64, min: Point2<f64>, max: Point2<f64>) -> Error {
    Error::GridTooSmall {
        captured,
        min_x: min.x,
        min_y: min.y,
        max_x: max.x,
        max_y: max.y,
    }
}

/// Adds `weight * (cell area inside the box) / (box area * cell area)` to each cell.
/// Returns the captured share of the box area.
fn accumulate_box_coverage(grid: &mut SpatialGrid, b: &BoxParams, weight: f64) -> f64 {
    let spec = grid.spec;
    let poly = ConvexPolygon::from_box(b);
    let (min, max) = footprint_bounds([b]);
    let Some(((x0, x1), (y0, y1))) = spec.cell_range(&min, &max) else {
        return 0.0;
    };
    let area = b.area_bev();
    let cell_area = spec.cell_area();
    let mut covered = 0.0;
    for iy in y0..=y1 {
        for ix in x0..=x1 {
            let cell = cell_polygon(&spec, ix, iy);
            let inside = if cell.vertices.iter().all(|p| b.contains_bev(p)) {
                cell_area
            } else {
                polygon_intersection(&cell, &poly).area()
            };
            if inside > 0.0 {
                covered += inside;
                grid.values[spec.index(ix, iy)] += weight * inside / (area * cell_area);
            }
        }
    }
    covered / area
}

/// Exact uniform density `1/A` of a box, weighted by cell coverage on the boundary.
pub fn rasterize_box_uniform(b: &BoxParams, spec: &GridSpec) -> Result<SpatialGrid> {
    b.validate()?;
    let mut grid = SpatialGrid::zeros(*spec);
    let captured = accumulate_box_coverage(&mut grid, b, 1.0);
    if captured < MIN_CAPTURED {
        let (min, max) = footprint_bounds([b]);
        let (min, max) = inflate(min, max, spec.resolution);
        return Err(too_small(captured, min, max));
    }
    Ok(grid)
}

/// Weighted sum of uniform box densities.
pub fn rasterize_discrete_pg(dist: &DiscreteBoxDistribution, spec: &GridSpec) -> Result<SpatialGrid> {
    let mut grid = SpatialGrid::zeros(*spec);
    let mut captured = 0.0;
    for (b, weight) in &dist.modes {
        captured += weight * accumulate_box_coverage(&mut grid, b, *weight);
    }
    if captured < MIN_CAPTURED {
        let (min, max) = footprint_bounds(dist.modes.iter().map(|(b, _)| b));
        let (min, max) = inflate(min, max, spec.resolution);
        return Err(too_small(captured, min, max));
    }
    Ok(grid)
}

struct Kernel {
    mean: Point2<f64>,
    inv: Matrix2<f64>,
    norm: f64,
    cols: (usize, usize),
}

fn normal_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// `p_G` as a mixture of Gaussians over interior unit-box nodes.
///
/// Each node Gaussian carries its point covariance, the spread of the unit-box
/// cell it stands for, and a one-cell box prefilter, so the mixture stays
/// smooth at any node spacing. The node grid is refined beyond
/// `opts.interior` until the spacing does not exceed the narrowest kernel.
/// A point-mass posterior renders as [`rasterize_box_uniform`].
pub fn rasterize_pg(posterior: &LabelPosterior, spec: &GridSpec, opts: &RasterOptions) -> Result<SpatialGrid> {
    let posterior = LabelPosterior::new(posterior.mean, posterior.covariance)?;
    if posterior.is_deterministic() {
        return rasterize_box_uniform(&posterior.mean, spec);
    }
    let (nx, ny) = opts.interior;
    if nx == 0 || ny == 0 {
        return Err(Error::param("interior", "node grid must be at least 1x1"));
    }
    let moments = sym_basis_moments(&posterior, &MomentConfig::new(opts.samples, opts.seed))?;
    let mean_box = posterior.mean;
    let res = spec.resolution;
    let prefilter = res * res / 12.0;

    // Narrowest point spread over a coarse probe of the unit square.
    let mut narrowest = f64::INFINITY;
    for i in 0..5 {
        for j in 0..5 {
            let v0 = UnitPoint::bev(i as f64 / 4.0 - 0.5, j as f64 / 4.0 - 0.5);
            let cov = moments.bev_moments(&v0).1;
            narrowest = narrowest.min(cov.symmetric_eigenvalues().min().max(0.0));
        }
    }
    // spacing^2 <= narrowest + prefilter + spacing^2 / 12
    let max_spacing = ((narrowest + prefilter) * 12.0 / 11.0).sqrt();
    let refine = |extent: f64, min: usize| ((extent / max_spacing).ceil() as usize).clamp(min, MAX_NODES_PER_AXIS.max(min));
    let n1 = refine(mean_box.l, nx);
    let n2 = refine(mean_box.w, ny);
    let rot = mean_box.rotation_bev();
    let spread = rot
        * Matrix2::from_diagonal(&nalgebra::Vector2::new(
            (mean_box.l / n1 as f64).powi(2) / 12.0,
            (mean_box.w / n2 as f64).powi(2) / 12.0,
        ))
        * rot.transpose();

    let nodes = sample_interior_points(n1, n2)?;
    let weight = 1.0 / nodes.len() as f64;
    let (gx0, gy0) = (spec.origin.x, spec.origin.y);
    let gmax = spec.max_corner();
    let mut truncated = 0.0;
    let mut reach_min = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut reach_max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); spec.height];
    let mut kernels = Vec::with_capacity(nodes.len());
    for v0 in &nodes {
        let (mean, point_cov) = moments.bev_moments(v0);
        let mut cov = point_cov + spread + Matrix2::identity() * prefilter;
        cov = 0.5 * (cov + cov.transpose());
        let det = cov.determinant();
        let inv = cov
            .try_inverse()
            .filter(|_| det > 0.0)
            .ok_or(Error::NotPositiveDefinite("node covariance"))?;
        let (sx, sy) = (cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt());
        truncated += weight
            * (normal_tail((mean.x - gx0) / sx)
                + normal_tail((gmax.x - mean.x) / sx)
                + normal_tail((mean.y - gy0) / sy)
                + normal_tail((gmax.y - mean.y) / sy));
        reach_min = reach_min.inf(&Point2::new(mean.x - COVER_SIGMAS * sx, mean.y - COVER_SIGMAS * sy));
        reach_max = reach_max.sup(&Point2::new(mean.x + COVER_SIGMAS * sx, mean.y + COVER_SIGMAS * sy));
        let lo = Point2::new(mean.x - KERNEL_WINDOW * sx, mean.y - KERNEL_WINDOW * sy);
        let hi = Point2::new(mean.x + KERNEL_WINDOW * sx, mean.y + KERNEL_WINDOW * sy);
        if let Some(((x0, x1), (y0, y1))) = spec.cell_range(&lo, &hi) {
            let id = kernels.len() as u32;
            kernels.push(Kernel {
                mean,
                inv,
                norm: weight / (2.0 * std::f64::consts::PI * det.sqrt()),
                cols: (x0, x1),
            });
            for row in &mut rows[y0..=y1] {
                row.push(id);
            }
        }
    }
    if truncated > 1.0 - MIN_CAPTURED {
        let (min, max) = inflate(reach_min, reach_max, res);
        return Err(too_small(1.0 - truncated, min, max));
    }

    let mut grid = SpatialGrid::zeros(*spec);
    grid.values
        .par_chunks_mut(spec.width)
        .zip(rows.par_iter())
        .enumerate()
        .for_each(|(iy, (row, ids))| {
            let y = spec.cell_center(0, iy).y;
            for &id in ids {
                let k = &kernels[id as usize];
                let dy = y - k.mean.y;
                for (ix, cell) in row.iter_mut().enumerate().take(k.cols.1 + 1).skip(k.cols.0) {
                    let dx = spec.cell_center(ix, iy).x - k.mean.x;
                    let q = k.inv[(0, 0)] * dx * dx + 2.0 * k.inv[(0, 1)] * dx * dy + k.inv[(1, 1)] * dy * dy;
                    *cell += k.norm * (-0.5 * q).exp();
                }
            }
        });
    let mass = grid.mass();
    if mass > 0.0 {
        let scale = (1.0 - truncated) / mass;
        grid.values.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(grid)
}

/// Range of `x` on the horizontal line `y` inside the box, if any.
fn row_interval(b: &BoxParams, y: f64) -> Option<(f64, f64)> {
    let (s, c) = b.yaw.sin_cos();
    let dy = y - b.c2;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    // local length coordinate  c*dx + s*dy, local width coordinate -s*dx + c*dy
    for (coef, offset, half) in [(c, s * dy, 0.5 * b.l), (-s, c * dy, 0.5 * b.w)] {
        if coef.abs() < 1e-15 {
            if offset.abs() > half {
                return None;
            }
            continue;
        }
        let a = (-half - offset) / coef;
        let z = (half - offset) / coef;
        lo = lo.max(a.min(z));
        hi = hi.min(a.max(z));
    }
    (lo <= hi).then_some((lo + b.c1, hi + b.c1))
}

/// Adds `amount` to every cell whose center lies inside the box.
fn mark_centers<T: Copy + std::ops::AddAssign>(spec: &GridSpec, b: &BoxParams, values: &mut [T], amount: T) {
    let (min, max) = footprint_bounds([b]);
    let Some((_, (y0, y1))) = spec.cell_range(&min, &max) else {
        return;
    };
    let res = spec.resolution;
    for iy in y0..=y1 {
        let Some((lo, hi)) = row_interval(b, spec.cell_center(0, iy).y) else {
            continue;
        };
        let first = ((lo - spec.origin.x) / res - 0.5).ceil().max(0.0);
        let last = ((hi - spec.origin.x) / res - 0.5).floor().min(spec.width as f64 - 1.0);
        if last < first {
            continue;
        }
        for ix in first as usize..=last as usize {
            values[spec.index(ix, iy)] += amount;
        }
    }
}

/// Share of the box area inside the grid. A sampled box with a non-positive
/// size covers nothing and loses nothing.
fn captured_share(spec: &GridSpec, b: &BoxParams) -> f64 {
    if !(b.l > 0.0 && b.w > 0.0) {
        return 1.0;
    }
    polygon_intersection(&ConvexPolygon::from_box(b), &grid_polygon(spec)).area() / b.area_bev()
}

/// Indicator of cell centers inside the box.
pub fn rasterize_box_indicator(b: &BoxParams, spec: &GridSpec) -> Result<SpatialGrid> {
    b.validate()?;
    let captured = captured_share(spec, b);
    if captured < MIN_CAPTURED {
        let (min, max) = footprint_bounds([b]);
        return Err(too_small(captured, min, max));
    }
    let mut grid = SpatialGrid::zeros(*spec);
    mark_centers(spec, b, &mut grid.values, 1.0);
    Ok(grid)
}

/// `P_PDQ`: fraction of `samples` posterior boxes containing each cell center.
pub fn rasterize_pdq(posterior: &LabelPosterior, spec: &GridSpec, samples: usize, seed: u64) -> Result<SpatialGrid> {
    if samples == 0 {
        return Err(Error::param("samples", "need at least 1"));
    }
    let posterior = LabelPosterior::new(posterior.mean, posterior.covariance)?;
    if posterior.is_deterministic() {
        return rasterize_box_indicator(&posterior.mean, spec);
    }
    let boxes = sample_boxes(&posterior, samples, seed)?;
    let captured = boxes.iter().map(|b| captured_share(spec, b)).sum::<f64>() / samples as f64;
    if captured < MIN_CAPTURED {
        let (min, max) = footprint_bounds(&boxes);
        return Err(too_small(captured, min, max));
    }
    let counts = boxes
        .par_chunks(256)
        .fold(
            || vec![0u32; spec.len()],
            |mut acc, chunk| {
                for b in chunk {
                    mark_centers(spec, b, &mut acc, 1u32);
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; spec.len()],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(SpatialGrid {
        spec: *spec,
        values: counts.into_iter().map(|c| c as f64 / samples as f64).collect(),
    })
}

/// `P_PDQ` of a mixture: total weight of the modes containing each cell center.
pub fn rasterize_discrete_pdq(dist: &DiscreteBoxDistribution, spec: &GridSpec) -> Result<SpatialGrid> {
    let captured: f64 = dist.modes.iter().map(|(b, w)| w * captured_share(spec, b)).sum();
    if captured < MIN_CAPTURED {
        let (min, max) = footprint_bounds(dist.modes.iter().map(|(b, _)| b));
        return Err(too_small(captured, min, max));
    }
    let mut grid = SpatialGrid::zeros(*spec);
    for (b, weight) in &dist.modes {
        mark_centers(spec, b, &mut grid.values, *weight);
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{Mat5, prior_covariance};
    use approx::assert_abs_diff_eq;

    fn car() -> BoxParams {
        BoxParams::new(2.0, 1.0, 0.0, 4.0, 2.0, 1.5, 0.3).unwrap()
    }

    #[test]
    fn uniform_box_is_exact() {
        let b = BoxParams::bev(0.0, 0.0, 4.0, 2.0, 0.0).unwrap();
        let spec = covering_boxes([&b], 0.1).unwrap();
        let grid = rasterize_box_uniform(&b, &spec).unwrap();
        assert_abs_diff_eq!(grid.mass(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(grid.sample(&Point2::new(0.03, 0.02)), 1.0 / 8.0, epsilon = 1e-12);
        assert_eq!(grid.sample(&Point2::new(2.05, 0.0)), 0.0);
    }

    #[test]
    fn rotated_uniform_keeps_unit_mass() {
        let grid = rasterize_box_uniform(&car(), &covering_boxes([&car()], 0.1).unwrap()).unwrap();
        assert_abs_diff_eq!(grid.mass(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(grid.sample(&car().center_bev()), 1.0 / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn discrete_modes_scale_by_area() {
        let a = BoxParams::bev(0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        let b = BoxParams::bev(5.0, 0.0, 2.0, 2.0, 0.0).unwrap();
        let dist = DiscreteBoxDistribution::new(vec![(a, 0.5), (b, 0.5)]).unwrap();
        let spec = covering_boxes([&a, &b], 0.1).unwrap();
        let grid = rasterize_discrete_pg(&dist, &spec).unwrap();
        assert_abs_diff_eq!(grid.sample(&Point2::new(0.05, 0.05)), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(grid.sample(&Point2::new(5.05, 0.05)), 0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(grid.mass(), 1.0, epsilon = 1e-12);
        let pdq = rasterize_discrete_pdq(&dist, &spec).unwrap();
        assert_eq!(pdq.sample(&Point2::new(0.05, 0.05)), 0.5);
        assert_eq!(pdq.sample(&Point2::new(5.55, 0.55)), 0.5);
    }

    #[test]
    fn invalid_weights() {
        let a = BoxParams::bev(0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(DiscreteBoxDistribution::new(vec![(a, 0.4), (a, 0.4)]).is_err());
        assert!(DiscreteBoxDistribution::new(vec![(a, -0.5), (a, 1.5)]).is_err());
        assert!(DiscreteBoxDistribution::new(vec![]).is_err());
    }

    #[test]
    fn pg_mass_and_support() {
        let post = LabelPosterior::new(car(), prior_covariance(1.0).unwrap()).unwrap();
        let spec = covering_grid(&post, 0.1).unwrap();
        let grid = rasterize_pg(&post, &spec, &RasterOptions::default()).unwrap();
        assert!((grid.mass() - 1.0).abs() <= 0.01);
        assert!(grid.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn small_grid_reports_required_extent() {
        let post = LabelPosterior::new(car(), prior_covariance(1.0).unwrap()).unwrap();
        let spec = GridSpec::new(Point2::new(0.0, 0.0), 0.1, 20, 20).unwrap();
        match rasterize_pg(&post, &spec, &RasterOptions::default()) {
            Err(Error::GridTooSmall { captured, min_x, max_x, .. }) => {
                assert!(captured < MIN_CAPTURED);
                assert!(min_x < 0.0 && max_x > 4.0);
            }
            other => panic!("expected GridTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn pg_is_reproducible() {
        let post = LabelPosterior::new(car(), prior_covariance(4.0).unwrap()).unwrap();
        let spec = covering_grid(&post, 0.1).unwrap();
        let opts = RasterOptions { seed: 7, ..Default::default() };
        let a = rasterize_pg(&post, &spec, &opts).unwrap();
        let b = rasterize_pg(&post, &spec, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pdq_in_unit_range_and_indicator_for_point_mass() {
        let mut cov = Mat5::zeros();
        cov[(0, 0)] = 0.05;
        cov[(4, 4)] = 0.01;
        let post = LabelPosterior::new(car(), cov).unwrap();
        let spec = covering_grid(&post, 0.1).unwrap();
        let pdq = rasterize_pdq(&post, &spec, 512, 3).unwrap();
        assert!(pdq.values.iter().all(|v| (0.0..=1.0).contains(v)));

        let det = rasterize_pdq(&LabelPosterior::deterministic(car()), &spec, 16, 0).unwrap();
        for iy in 0..spec.height {
            for ix in 0..spec.width {
                let inside = car().contains_bev(&spec.cell_center(ix, iy));
                assert_eq!(det.get(ix, iy), if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn row_interval_matches_containment() {
        let b = car();
        for k in 0..200 {
            let y = -2.0 + 0.0237 * k as f64;
            let interval = row_interval(&b, y);
            for i in 0..300 {
                let x = -3.0 + 0.031 * i as f64;
                let inside = interval.is_some_and(|(lo, hi)| x >= lo && x <= hi);
                let q = b.to_local_bev(&Point2::new(x, y));
                let strict = q.x.abs() < 0.5 * b.l - 1e-9 && q.y.abs() < 0.5 * b.w - 1e-9;
                let outside = q.x.abs() > 0.5 * b.l + 1e-9 || q.y.abs() > 0.5 * b.w + 1e-9;
                if strict {
                    assert!(inside);
                }
                if outside {
                    assert!(!inside);
                }
            }
        }
    }
}
