//! Probabilistic Jaccard index (JIoU) of two discrete distributions.
//!
//! For masses `p`, `q` on a shared index space,
//! `J(p, q) = sum_{i: p_i > 0, q_i > 0} 1 / sum_j max(p_j / p_i, q_j / q_i)`
//! with `j` over the union of the supports. The value is invariant to scaling
//! either input, so unnormalized occupancy grids are valid inputs.

use std::cmp::Ordering;

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::geometry::BoxParams;
use crate::inference::LabelPosterior;
use crate::spatial::{rasterize_box_uniform, rasterize_pg, GridSpec, ProbBox, RasterOptions, SpatialGrid};

/// Cells below this fraction of a grid's peak are outside its support.
pub const SUPPORT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    masses: Vec<f64>,
}

impl DiscreteDistribution {
    /// Masses must be finite and non-negative with at least one positive entry.
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::param("masses", "must be finite and non-negative"));
        }
        if !masses.iter().any(|m| *m > 0.0) {
            return Err(Error::EmptyDistribution);
        }
        Ok(DiscreteDistribution { masses })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JiouResult {
    pub value: f64,
    pub intersection_cells: usize,
    pub union_cells: usize,
}

fn check_lengths(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    Ok(())
}

/// Quadratic reference implementation.
pub fn jaccard_naive(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<JiouResult> {
    check_lengths(p, q)?;
    let (p, q) = (&p.masses, &q.masses);
    let union: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0 || q[i] > 0.0).collect();
    let mut value = 0.0;
    let mut intersection_cells = 0;
    for &i in &union {
        if p[i] > 0.0 && q[i] > 0.0 {
            intersection_cells += 1;
            let denom: f64 = union.iter().map(|&j| (p[j] / p[i]).max(q[j] / q[i])).sum();
            value += 1.0 / denom;
        }
    }
    Ok(JiouResult {
        value,
        intersection_cells,
        union_cells: union.len(),
    })
}

/// `O(n log n)` evaluation by sorting the union support on `q / p`.
///
/// For `j` ranked at or after `i`, `q_j / q_i >= p_j / p_i`, so each
/// denominator is `suffix(q) / q_i + prefix(p) / p_i`.
pub fn jaccard_fast(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<JiouResult> {
    check_lengths(p, q)?;
    let (p, q) = (&p.masses, &q.masses);
    let mut order: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0 || q[i] > 0.0).collect();
    // q_a / p_a vs q_b / p_b without division: p = 0 sorts last, q = 0 first.
    order.sort_unstable_by(|&a, &b| match (q[a] * p[b]).partial_cmp(&(q[b] * p[a])) {
        Some(Ordering::Equal) | None => a.cmp(&b),
        Some(o) => o,
    });
    let n = order.len();
    let mut suffix_q = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix_q[k] = suffix_q[k + 1] + q[order[k]];
    }
    let mut prefix_p = 0.0;
    let mut value = 0.0;
    let mut intersection_cells = 0;
    for (k, &i) in order.iter().enumerate() {
        if p[i] > 0.0 && q[i] > 0.0 {
            intersection_cells += 1;
            value += 1.0 / (suffix_q[k] / q[i] + prefix_p / p[i]);
        }
        prefix_p += p[i];
    }
    Ok(JiouResult {
        value,
        intersection_cells,
        union_cells: n,
    })
}

fn union_spec(a: &GridSpec, b: &GridSpec) -> Result<GridSpec> {
    let res = a.resolution.min(b.resolution);
    let min = a.origin.inf(&b.origin);
    let max = a.max_corner().sup(&b.max_corner());
    let cells = |extent: f64| ((extent / res - 1e-9).ceil() as usize).max(1);
    GridSpec::new(min, res, cells(max.x - min.x), cells(max.y - min.y))
}

fn floored(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let values: Vec<f64> = values.collect();
    let cut = SUPPORT_FLOOR * values.iter().copied().fold(0.0, f64::max);
    values.into_iter().map(|v| if v < cut { 0.0 } else { v }).collect()
}

/// JIoU of two grids, resampled by nearest cell onto the union lattice at the finer resolution.
pub fn jiou_grids(a: &SpatialGrid, b: &SpatialGrid) -> Result<JiouResult> {
    let (pa, pb) = if a.spec == b.spec {
        (floored(a.values.iter().copied()), floored(b.values.iter().copied()))
    } else {
        let spec = union_spec(&a.spec, &b.spec)?;
        let centers: Vec<Point2<f64>> = (0..spec.height)
            .flat_map(|iy| (0..spec.width).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| spec.cell_center(ix, iy))
            .collect();
        (
            floored(centers.iter().map(|c| a.sample(c))),
            floored(centers.iter().map(|c| b.sample(c))),
        )
    };
    jaccard_fast(&DiscreteDistribution::new(pa)?, &DiscreteDistribution::new(pb)?)
}

/// JIoU between a deterministic box and a posterior's `p_G`, on one grid.
pub fn jiou_box_vs_posterior(
    b: &BoxParams,
    posterior: &LabelPosterior,
    spec: &GridSpec,
    opts: &RasterOptions,
) -> Result<JiouResult> {
    let label = rasterize_box_uniform(b, spec)?;
    let dist = rasterize_pg(posterior, spec, opts)?;
    jiou_grids(&label, &dist)
}

/// JIoU between the `p_G` of two box distributions on a grid covering both.
pub fn jiou_distributions(a: &ProbBox, b: &ProbBox, resolution: f64, opts: &RasterOptions) -> Result<JiouResult> {
    let (sa, sb) = (a.covering_grid(resolution)?, b.covering_grid(resolution)?);
    let spec = GridSpec::covering_rect(sa.origin.inf(&sb.origin), sa.max_corner().sup(&sb.max_corner()), resolution)?;
    jiou_grids(&a.rasterize_pg(&spec, opts)?, &b.rasterize_pg(&spec, opts)?)
}
