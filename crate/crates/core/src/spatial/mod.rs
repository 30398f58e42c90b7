//! Spatial distributions of probabilistic boxes.

pub mod feature;
pub mod grid;
pub mod moments;
pub mod raster;

pub use feature::{FeatureMatrix, HomogeneousPoint};
pub use grid::{GridSpec, SpatialGrid, DEFAULT_RESOLUTION};
pub use moments::{
    corner_total_variance, param_recovery, point_moments, sample_boxes, sym_basis_moments, CornerReport,
    CornerVariance, MomentConfig, ParamRecovery, PointGaussian, SymBasisMoments,
};
pub use raster::{
    covering_boxes, covering_grid, rasterize_box_indicator, rasterize_box_uniform, rasterize_discrete_pdq,
    rasterize_discrete_pg, rasterize_pdq, rasterize_pg, DiscreteBoxDistribution, ProbBox, RasterOptions,
};
