//! Monte Carlo moments of surface points `V(v0, Y) = Phi(Y)^T w` under a box posterior.
//!
//! `Phi(Y)` is nonlinear in yaw, so moments are estimated from posterior
//! samples drawn with a caller-supplied seed. Every second moment is linear
//! in `w w^T`, so ten basis moments over `Sym_4` give the moments of any
//! homogeneous point by recombination.

use std::sync::OnceLock;

use nalgebra::{Matrix3, Matrix3x4, Point2, Point3, SMatrix, SVector, Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::feature::{feature_to_ground, FeatureMatrix, HomogeneousPoint};
use crate::error::{Error, Result};
use crate::geometry::{box_to_world, box_corners_bev, BoxParams, UnitPoint, CORNERS_UNIT};
use crate::inference::{LabelPosterior, Vec5};

pub const DEFAULT_SAMPLES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MomentConfig {
    fn default() -> Self {
        MomentConfig {
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

impl MomentConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        MomentConfig { samples, seed }
    }
}

/// Gaussian approximation of a surface point, in the ground frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGaussian {
    pub mean: Point3<f64>,
    pub covariance: Matrix3<f64>,
}

impl PointGaussian {
    pub fn bev_mean(&self) -> Point2<f64> {
        Point2::new(self.mean.x, self.mean.y)
    }

    pub fn bev_covariance(&self) -> nalgebra::Matrix2<f64> {
        self.covariance.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn total_variance(&self) -> f64 {
        self.covariance.trace()
    }
}

/// Standard normal draws whose empirical mean is zero and whose empirical
/// covariance (divided by `n`) is the identity. Needs `n > 5`; fewer draws
/// are returned unadjusted.
fn matched_normals(samples: usize, seed: u64) -> Vec<Vec5> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<Vec5> = (0..samples)
        .map(|_| Vec5::from_fn(|_, _| StandardNormal.sample(&mut rng)))
        .collect();
    if samples <= 5 {
        return draws;
    }
    let n = samples as f64;
    let mean = draws.iter().sum::<Vec5>() / n;
    let cov = draws
        .iter()
        .map(|z| (z - mean) * (z - mean).transpose())
        .sum::<crate::inference::Mat5>()
        / n;
    let Some(chol) = cov.cholesky() else {
        return draws;
    };
    let whiten = chol.l().try_inverse().expect("Cholesky factor is invertible");
    for z in &mut draws {
        *z = whiten * (*z - mean);
    }
    draws
}

/// Draws `samples` boxes from the posterior. Same seed, same boxes.
///
/// The draws are moment-matched: their empirical mean and covariance equal the
/// posterior's exactly when `samples > 5`.
pub fn sample_boxes(posterior: &LabelPosterior, samples: usize, seed: u64) -> Result<Vec<BoxParams>> {
    let posterior = LabelPosterior::new(posterior.mean, posterior.covariance)?;
    let root = posterior.sqrt_covariance();
    let mean = Vec5::from(posterior.mean.bev_vector());
    Ok(matched_normals(samples, seed)
        .into_iter()
        .map(|z| {
            let p = mean + root * z;
            posterior.mean.with_bev_vector(&[p[0], p[1], p[2], p[3], p[4]])
        })
        .collect())
}

/// Sampled `Phi(Y)^T - Phi(ybar)^T`, or `None` for a point-mass posterior.
fn centered_features(posterior: &LabelPosterior, cfg: &MomentConfig) -> Result<Option<Vec<Matrix3x4<f64>>>> {
    if cfg.samples < 2 {
        return Err(Error::param("samples", format!("need at least 2, got {}", cfg.samples)));
    }
    let posterior = LabelPosterior::new(posterior.mean, posterior.covariance)?;
    if posterior.is_deterministic() {
        return Ok(None);
    }
    let reference = FeatureMatrix::from_box(&posterior.mean).0;
    Ok(Some(
        sample_boxes(&posterior, cfg.samples, cfg.seed)?
            .iter()
            .map(|b| FeatureMatrix::from_box(b).0 - reference)
            .collect(),
    ))
}

/// Mean and covariance of `V(v0, Y)` under the posterior.
pub fn point_moments(v0: &UnitPoint, posterior: &LabelPosterior, cfg: &MomentConfig) -> Result<PointGaussian> {
    let w = HomogeneousPoint::from_unit(v0);
    let Some(features) = centered_features(posterior, cfg)? else {
        return Ok(PointGaussian {
            mean: box_to_world(&posterior.mean, v0),
            covariance: Matrix3::zeros(),
        });
    };
    let n = features.len() as f64;
    let mut first = Vector3::zeros();
    let mut second = Matrix3::zeros();
    for f in &features {
        let d = f * w.0;
        first += d;
        second += d * d.transpose();
    }
    first /= n;
    second /= n;
    let base = FeatureMatrix::from_box(&posterior.mean).apply(&w);
    Ok(PointGaussian {
        mean: feature_to_ground(&(base + first)),
        covariance: ground_covariance(&(second - first * first.transpose())),
    })
}

fn ground_covariance(feature_cov: &Matrix3<f64>) -> Matrix3<f64> {
    // feature (x, up, y) -> ground (x, y, up)
    let p = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0);
    let c = p * feature_cov * p.transpose();
    0.5 * (c + c.transpose())
}

/// Fixed homogeneous basis whose outer products span `Sym_4`.
pub fn sym_basis() -> [Vector4<f64>; 10] {
    [
        Vector4::new(0.0, 0.0, 0.0, 1.0),
        Vector4::new(1.0, 0.0, 0.0, 1.0),
        Vector4::new(0.0, 1.0, 0.0, 1.0),
        Vector4::new(0.0, 0.0, 1.0, 1.0),
        Vector4::new(-1.0, 0.0, 0.0, 1.0),
        Vector4::new(0.0, -1.0, 0.0, 1.0),
        Vector4::new(0.0, 0.0, -1.0, 1.0),
        Vector4::new(1.0, 1.0, 0.0, 1.0),
        Vector4::new(1.0, 0.0, 1.0, 1.0),
        Vector4::new(0.0, 1.0, 1.0, 1.0),
    ]
}

fn upper_triangle(w: &Vector4<f64>) -> SVector<f64, 10> {
    let mut out = SVector::<f64, 10>::zeros();
    let mut k = 0;
    for i in 0..4 {
        for j in i..4 {
            out[k] = w[i] * w[j];
            k += 1;
        }
    }
    out
}

fn basis_inverse() -> &'static SMatrix<f64, 10, 10> {
    static INV: OnceLock<SMatrix<f64, 10, 10>> = OnceLock::new();
    INV.get_or_init(|| {
        let basis = sym_basis();
        let m = SMatrix::<f64, 10, 10>::from_fn(|r, c| upper_triangle(&basis[c])[r]);
        m.try_inverse().expect("the Sym_4 basis is linearly independent")
    })
}

/// Coefficients `alpha` with `sum_i alpha_i w_i w_i^T = w w^T`.
pub fn sym_coefficients(w: &Vector4<f64>) -> [f64; 10] {
    let a = basis_inverse() * upper_triangle(w);
    std::array::from_fn(|i| a[i])
}

/// Basis second moments of a posterior's feature matrix.
///
/// Moments are stored about `Phi(ybar)` for precision; [`Self::second_moment`]
/// returns raw moments.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBasisMoments {
    reference: Matrix3x4<f64>,
    mean_offset: Matrix3x4<f64>,
    central: [Matrix3<f64>; 10],
}

pub fn sym_basis_moments(posterior: &LabelPosterior, cfg: &MomentConfig) -> Result<SymBasisMoments> {
    let reference = FeatureMatrix::from_box(&posterior.mean).0;
    let basis = sym_basis();
    let Some(features) = centered_features(posterior, cfg)? else {
        return Ok(SymBasisMoments {
            reference,
            mean_offset: Matrix3x4::zeros(),
            central: [Matrix3::zeros(); 10],
        });
    };
    let n = features.len() as f64;
    let mut mean_offset = Matrix3x4::zeros();
    let mut central = [Matrix3::zeros(); 10];
    for f in &features {
        mean_offset += f;
        for (acc, w) in central.iter_mut().zip(&basis) {
            let d = f * w;
            *acc += d * d.transpose();
        }
    }
    Ok(SymBasisMoments {
        reference,
        mean_offset: mean_offset / n,
        central: central.map(|m| m / n),
    })
}

impl SymBasisMoments {
    /// `E[Phi(Y)]^T`.
    pub fn mean_feature(&self) -> Matrix3x4<f64> {
        self.reference + self.mean_offset
    }

    /// Raw `E[Phi^T w w^T Phi]` for a homogeneous `w`.
    pub fn second_moment(&self, w: &Vector4<f64>) -> Matrix3<f64> {
        let alpha = sym_coefficients(w);
        let central: Matrix3<f64> = alpha.iter().zip(&self.central).map(|(a, m)| m * *a).sum();
        let base = self.reference * w;
        let shift = self.mean_offset * w;
        central + base * shift.transpose() + shift * base.transpose() + base * base.transpose()
    }

    /// Raw second moments of the ten basis points.
    pub fn raw_basis_moments(&self) -> [Matrix3<f64>; 10] {
        sym_basis().map(|w| self.second_moment(&w))
    }

    /// Feature-frame mean and covariance of `Phi^T w`.
    pub fn feature_moments(&self, w: &Vector4<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let alpha = sym_coefficients(w);
        let central: Matrix3<f64> = alpha.iter().zip(&self.central).map(|(a, m)| m * *a).sum();
        let shift = self.mean_offset * w;
        (self.reference * w + shift, central - shift * shift.transpose())
    }

    pub fn point_gaussian(&self, w: &HomogeneousPoint) -> PointGaussian {
        let (mean, cov) = self.feature_moments(&w.0);
        PointGaussian {
            mean: feature_to_ground(&mean),
            covariance: ground_covariance(&cov),
        }
    }

    /// BEV mean and covariance of a unit point.
    pub fn bev_moments(&self, v0: &UnitPoint) -> (Point2<f64>, nalgebra::Matrix2<f64>) {
        let g = self.point_gaussian(&HomogeneousPoint::from_unit(v0));
        (g.bev_mean(), g.bev_covariance())
    }
}

/// Parameter moments recovered from the feature matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRecovery {
    /// Ground-frame `(x, y, z)` center variances.
    pub center_variance: Vector3<f64>,
    pub length_sq: f64,
    pub width_sq: f64,
    pub height_sq: f64,
}

pub fn param_recovery(posterior: &LabelPosterior, cfg: &MomentConfig) -> Result<ParamRecovery> {
    let moments = sym_basis_moments(posterior, cfg)?;
    let center = moments.point_gaussian(&HomogeneousPoint::CENTER);
    let tr = |w: &HomogeneousPoint| moments.second_moment(&w.0).trace();
    Ok(ParamRecovery {
        center_variance: center.covariance.diagonal(),
        length_sq: tr(&HomogeneousPoint::LENGTH),
        width_sq: tr(&HomogeneousPoint::WIDTH),
        height_sq: tr(&HomogeneousPoint::HEIGHT),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerVariance {
    /// 1 for the corner nearest the observer, up to 4.
    pub rank: usize,
    /// Index into [`CORNERS_UNIT`].
    pub corner: usize,
    pub distance: f64,
    pub total_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerReport {
    /// Sorted by ascending distance to the observer.
    pub corners: [CornerVariance; 4],
    pub center_total_variance: f64,
}

/// Total variance of each BEV corner, ranked by distance to `observer`.
pub fn corner_total_variance(
    posterior: &LabelPosterior,
    observer: &Point2<f64>,
    cfg: &MomentConfig,
) -> Result<CornerReport> {
    let moments = sym_basis_moments(posterior, cfg)?;
    let positions = box_corners_bev(&posterior.mean);
    let mut corners: Vec<CornerVariance> = CORNERS_UNIT
        .iter()
        .enumerate()
        .map(|(i, &(v1, v2))| {
            let g = moments.point_gaussian(&HomogeneousPoint::from_unit(&UnitPoint::new(v1, v2, 0.0)));
            CornerVariance {
                rank: 0,
                corner: i,
                distance: (positions[i] - observer).norm(),
                total_variance: g.total_variance(),
            }
        })
        .collect();
    corners.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.corner.cmp(&b.corner)));
    for (r, c) in corners.iter_mut().enumerate() {
        c.rank = r + 1;
    }
    Ok(CornerReport {
        corners: [corners[0], corners[1], corners[2], corners[3]],
        center_total_variance: moments.point_gaussian(&HomogeneousPoint::CENTER).total_variance(),
    })
}

/// First-order BEV covariance of a unit point, `J Sigma J^T`. Cheap and
/// deterministic; used for sizing grids.
pub fn linearized_bev_covariance(posterior: &LabelPosterior, v0: &UnitPoint) -> nalgebra::Matrix2<f64> {
    let j = crate::inference::generator_jacobian(&posterior.mean, v0);
    j * posterior.covariance * j.transpose()
}

pub(crate) fn max_std(cov: &nalgebra::Matrix2<f64>) -> f64 {
    let eig = cov.symmetric_eigenvalues();
    eig.max().max(0.0).sqrt()
}
