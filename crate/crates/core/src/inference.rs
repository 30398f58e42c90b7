//! Generative point model and the variational posterior over box parameters.
//!
//! Observed BEV points are a Gaussian mixture around generator points
//! `v_j(y)` on the box surface. Given soft registrations of points to
//! generators, the posterior over `y = [c1, c2, l, w, yaw]` is Gaussian once
//! `v_j(y)` is linearized about the annotated box, and its mean is pinned to
//! that annotation.

use nalgebra::{DMatrix, Point2, Point3, SMatrix, SVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{box_to_world_bev, sample_boundary_points, BoxParams, UnitPoint};

pub type Mat5 = SMatrix<f64, 5, 5>;
pub type Vec5 = SVector<f64, 5>;

/// Index of each entry in the BEV parameter vector.
pub mod param {
    pub const C1: usize = 0;
    pub const C2: usize = 1;
    pub const L: usize = 2;
    pub const W: usize = 3;
    pub const YAW: usize = 4;
}

/// Default EM floor on the noise scale, in meters.
pub const SIGMA_FLOOR: f64 = 0.01;
/// Default spacing of boundary generators, in meters.
pub const DEFAULT_SPACING: f64 = 0.1;
/// Default segmentation margin, in meters.
pub const DEFAULT_MARGIN: f64 = 0.1;
/// Default observation noise, in meters.
pub const DEFAULT_SIGMA: f64 = 0.2;
/// Posteriors whose largest covariance eigenvalue is below this are treated as point masses.
pub const DETERMINISTIC_EIGEN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub v0: UnitPoint,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeSurfaceModel {
    generators: Vec<Generator>,
}

impl GenerativeSurfaceModel {
    pub fn new(generators: Vec<Generator>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::DegenerateModel("model needs at least one generator".into()));
        }
        if let Some(g) = generators.iter().find(|g| !(g.sigma > 0.0) || !g.sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be positive, got {}", g.sigma)));
        }
        Ok(GenerativeSurfaceModel { generators })
    }

    /// Generators spread along the BEV perimeter of `b`, sharing one `sigma`.
    pub fn boundary(b: &BoxParams, spacing: f64, sigma: f64) -> Result<Self> {
        let points = sample_boundary_points(b, spacing)?;
        Self::new(points.into_iter().map(|v0| Generator { v0, sigma }).collect())
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn with_shared_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(
            self.generators
                .iter()
                .map(|g| Generator { v0: g.v0, sigma })
                .collect(),
        )
    }

    /// World BEV generator locations for the box `b`.
    pub fn locations(&self, b: &BoxParams) -> Vec<Point2<f64>> {
        self.generators.iter().map(|g| box_to_world_bev(b, &g.v0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectPoints {
    pub points: Vec<Point2<f64>>,
}

impl ObjectPoints {
    pub fn new(points: Vec<Point2<f64>>) -> Self {
        ObjectPoints { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Soft assignment of points (columns) to generators (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    weights: DMatrix<f64>,
}

impl Registration {
    pub fn from_matrix(weights: DMatrix<f64>) -> Result<Self> {
        for (k, col) in weights.column_iter().enumerate() {
            if col.iter().any(|w| !(0.0..=1.0).contains(w)) {
                return Err(Error::param("registration", format!("column {k} has weights outside [0, 1]")));
            }
            let s: f64 = col.sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::param("registration", format!("column {k} sums to {s}")));
            }
        }
        Ok(Registration { weights })
    }

    /// One-hot registration: point `k` belongs to generator `assignment[k]`.
    pub fn hard(generators: usize, assignment: &[usize]) -> Result<Self> {
        let mut weights = DMatrix::zeros(generators, assignment.len());
        for (k, &j) in assignment.iter().enumerate() {
            if j >= generators {
                return Err(Error::param("assignment", format!("generator {j} out of range")));
            }
            weights[(j, k)] = 1.0;
        }
        Ok(Registration { weights })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn num_points(&self) -> usize {
        self.weights.ncols()
    }

    /// Total responsibility `sum_k phi_jk` per generator.
    pub fn generator_totals(&self) -> Vec<f64> {
        self.weights.row_iter().map(|r| r.sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    pub mean: Vec5,
    pub covariance: Mat5,
}

impl GaussianPrior {
    pub fn new(mean: Vec5, covariance: Mat5) -> Result<Self> {
        if (covariance - covariance.transpose()).abs().max() > 1e-12 * covariance.abs().max().max(1.0) {
            return Err(Error::NotPositiveDefinite("prior covariance is not symmetric"));
        }
        if covariance.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("prior covariance"));
        }
        Ok(GaussianPrior { mean, covariance })
    }

    /// Prior centered on `mean_box` with the dataset-derived covariance scaled by `1/weight`.
    pub fn weighted(mean_box: &BoxParams, weight: f64) -> Result<Self> {
        Self::new(Vec5::from(mean_box.bev_vector()), prior_covariance(weight)?)
    }
}

/// `(1/weight) * diag(0.44^2, 0.11^2, 0.25^2, 0.25^2, 0.17^2)` over `[c1, c2, l, w, yaw]`.
pub fn prior_covariance(weight: f64) -> Result<Mat5> {
    if !(weight > 0.0) || !weight.is_finite() {
        return Err(Error::param("weight", format!("must be positive and finite, got {weight}")));
    }
    let std = [0.44_f64, 0.11, 0.25, 0.25, 0.17];
    Ok(Mat5::from_diagonal(&Vec5::from(std.map(|s| s * s / weight))))
}

/// Gaussian over BEV box parameters whose mean is the annotated box.
///
/// `covariance` is over `[c1, c2, l, w, yaw]`; `c3` and `h` of `mean` are
/// treated as exact.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPosterior {
    pub mean: BoxParams,
    pub covariance: Mat5,
}

impl LabelPosterior {
    pub fn new(mean: BoxParams, covariance: Mat5) -> Result<Self> {
        mean.validate()?;
        let scale = covariance.abs().max().max(1e-300);
        if covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("covariance has non-finite entries"));
        }
        if (covariance - covariance.transpose()).abs().max() > 1e-9 * scale {
            return Err(Error::NotPositiveDefinite("covariance is not symmetric"));
        }
        let min_eig = SymmetricEigen::new(covariance).eigenvalues.min();
        if min_eig < -1e-9 * scale {
            return Err(Error::NotPositiveDefinite("covariance has a negative eigenvalue"));
        }
        Ok(LabelPosterior { mean, covariance })
    }

    pub fn deterministic(mean: BoxParams) -> Self {
        LabelPosterior {
            mean,
            covariance: Mat5::zeros(),
        }
    }

    /// Independent variances for `[c1, c2, l, w, yaw]`.
    pub fn from_variances(mean: BoxParams, variances: [f64; 5]) -> Result<Self> {
        if variances.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::param("variances", "must be non-negative"));
        }
        Self::new(mean, Mat5::from_diagonal(&Vec5::from(variances)))
    }

    pub fn max_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.covariance).eigenvalues.max()
    }

    pub fn is_deterministic(&self) -> bool {
        self.max_eigenvalue() < DETERMINISTIC_EIGEN
    }

    /// Symmetric square root `S` with `S * S^T = covariance`, for sampling.
    pub fn sqrt_covariance(&self) -> Mat5 {
        let eig = SymmetricEigen::new(self.covariance);
        let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        eig.eigenvectors * Mat5::from_diagonal(&d) * eig.eigenvectors.transpose()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        LabelPosterior {
            mean: BoxParams {
                c1: self.mean.c1 + dx,
                c2: self.mean.c2 + dy,
                ..self.mean
            },
            covariance: self.covariance,
        }
    }
}

/// Softmax registration of each point over generators placed on `mean_box`.
pub fn registration_weights(points: &ObjectPoints, model: &GenerativeSurfaceModel, mean_box: &BoxParams) -> Registration {
    let sigmas: Vec<f64> = model.generators().iter().map(|g| g.sigma).collect();
    registration_with_sigmas(points, model, mean_box, &sigmas)
}

fn registration_with_sigmas(
    points: &ObjectPoints,
    model: &GenerativeSurfaceModel,
    mean_box: &BoxParams,
    sigmas: &[f64],
) -> Registration {
    let locations = model.locations(mean_box);
    let m = locations.len();
    let mut weights = DMatrix::zeros(m, points.len());
    let mut logits = vec![0.0; m];
    for (k, x) in points.points.iter().enumerate() {
        for (j, v) in locations.iter().enumerate() {
            logits[j] = -(x - v).norm_squared() / (2.0 * sigmas[j] * sigmas[j]);
        }
        let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().map(|l| (l - peak).exp()).sum();
        for j in 0..m {
            weights[(j, k)] = (logits[j] - peak).exp() / total;
        }
    }
    Registration { weights }
}

/// Jacobian of the BEV generator location with respect to `[c1, c2, l, w, yaw]` at `b`.
pub fn generator_jacobian(b: &BoxParams, v0: &UnitPoint) -> SMatrix<f64, 2, 5> {
    let (s, c) = b.yaw.sin_cos();
    let (a, d) = (v0.v1, v0.v2);
    let (la, wd) = (b.l * a, b.w * d);
    SMatrix::<f64, 2, 5>::from_row_slice(&[
        1.0, 0.0, c * a, -s * d, -s * la - c * wd, //
        0.0, 1.0, s * a, c * d, c * la - s * wd,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorOptions {
    /// When false, yaw is held at the annotation and its row and column of
    /// the covariance are zero.
    pub estimate_yaw: bool,
}

impl Default for PosteriorOptions {
    fn default() -> Self {
        PosteriorOptions { estimate_yaw: true }
    }
}

/// Variational posterior over the BEV parameters of `mean_box`.
pub fn posterior(
    points: &ObjectPoints,
    model: &GenerativeSurfaceModel,
    prior: &GaussianPrior,
    mean_box: &BoxParams,
) -> Result<LabelPosterior> {
    let reg = registration_weights(points, model, mean_box);
    posterior_from_registration(model, prior, mean_box, &reg, PosteriorOptions::default())
}

/// Posterior for a given registration. Its precision is the prior precision
/// plus `sum_j (sum_k phi_jk) J_j^T J_j / sigma_j^2`.
pub fn posterior_from_registration(
    model: &GenerativeSurfaceModel,
    prior: &GaussianPrior,
    mean_box: &BoxParams,
    registration: &Registration,
    options: PosteriorOptions,
) -> Result<LabelPosterior> {
    mean_box.validate()?;
    let prior = GaussianPrior::new(prior.mean, prior.covariance)?;
    if registration.weights().nrows() != model.len() {
        return Err(Error::param(
            "registration",
            format!("{} rows for {} generators", registration.weights().nrows(), model.len()),
        ));
    }
    if registration.num_points() == 0 && options.estimate_yaw {
        return LabelPosterior::new(*mean_box, prior.covariance);
    }

    let prior_precision = prior
        .covariance
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("prior covariance"))?
        .inverse();
    let mut precision = prior_precision;
    for (g, total) in model.generators().iter().zip(registration.generator_totals()) {
        if total == 0.0 {
            continue;
        }
        let jac = generator_jacobian(mean_box, &g.v0);
        precision += jac.transpose() * jac * (total / (g.sigma * g.sigma));
    }

    let covariance = if options.estimate_yaw {
        invert_spd(&precision)?
    } else {
        let block: SMatrix<f64, 4, 4> = precision.fixed_view::<4, 4>(0, 0).into_owned();
        let inv = block
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("posterior precision"))?
            .inverse();
        let mut full = Mat5::zeros();
        full.fixed_view_mut::<4, 4>(0, 0).copy_from(&inv);
        full
    };
    let covariance = 0.5 * (covariance + covariance.transpose());
    LabelPosterior::new(*mean_box, covariance)
}

fn invert_spd(m: &Mat5) -> Result<Mat5> {
    Ok(m.cholesky()
        .ok_or(Error::NotPositiveDefinite("posterior precision"))?
        .inverse())
}

/// How the EM noise update normalizes the weighted residual sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmNormalization {
    /// Divide by `K * d`: the per-dimension residual variance.
    #[default]
    PerPoint,
    /// Divide by `M * d`, the literal textbook form.
    PerGenerator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub sigma_floor: f64,
    /// Starting sigma; defaults to the model's mean generator sigma.
    pub init_sigma: Option<f64>,
    pub normalization: EmNormalization,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iters: 200,
            tol: 1e-7,
            sigma_floor: SIGMA_FLOOR,
            init_sigma: None,
            normalization: EmNormalization::PerPoint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseEstimate {
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Estimates one shared noise scale by alternating registration and the
/// weighted mean-square residual update.
pub fn em_sigma(
    points: &ObjectPoints,
    model: &GenerativeSurfaceModel,
    mean_box: &BoxParams,
    options: &EmOptions,
) -> Result<NoiseEstimate> {
    if points.is_empty() {
        return Err(Error::Input("EM noise estimation needs at least one point".into()));
    }
    if !(options.sigma_floor > 0.0) {
        return Err(Error::param("sigma_floor", "must be positive"));
    }
    const DIM: f64 = 2.0;
    let locations = model.locations(mean_box);
    let m = locations.len();
    let k = points.len();
    let denom = match options.normalization {
        EmNormalization::PerPoint => k as f64 * DIM,
        EmNormalization::PerGenerator => m as f64 * DIM,
    };
    let mut sigma = options
        .init_sigma
        .unwrap_or_else(|| model.generators().iter().map(|g| g.sigma).sum::<f64>() / m as f64)
        .max(options.sigma_floor);

    let mut sq = vec![0.0; m];
    let mut logits = vec![0.0; m];
    for iter in 1..=options.max_iters {
        let inv = 1.0 / (2.0 * sigma * sigma);
        let mut residual = 0.0;
        for x in &points.points {
            for (j, v) in locations.iter().enumerate() {
                sq[j] = (x - v).norm_squared();
                logits[j] = -sq[j] * inv;
            }
            let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            let mut weighted = 0.0;
            for j in 0..m {
                let e = (logits[j] - peak).exp();
                total += e;
                weighted += e * sq[j];
            }
            residual += weighted / total;
        }
        let next = (residual / denom).sqrt().max(options.sigma_floor);
        let delta = (next - sigma).abs();
        sigma = next;
        if delta < options.tol {
            return Ok(NoiseEstimate {
                sigma,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(NoiseEstimate {
        sigma,
        iterations: options.max_iters,
        converged: false,
    })
}

/// BEV projections of the points that fall inside `b` inflated by `margin` on every side.
pub fn segment_points(cloud: impl IntoIterator<Item = Point3<f64>>, b: &BoxParams, margin: f64) -> Result<ObjectPoints> {
    if !(margin >= 0.0) {
        return Err(Error::param("margin", format!("must be non-negative, got {margin}")));
    }
    let half_l = 0.5 * b.l + margin;
    let half_w = 0.5 * b.w + margin;
    let points = cloud
        .into_iter()
        .map(|p| Point2::new(p.x, p.y))
        .filter(|p| {
            let q = b.to_local_bev(p);
            q.x.abs() <= half_l && q.y.abs() <= half_w
        })
        .collect();
    Ok(ObjectPoints { points })
}

/// How the observation noise of an object is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    Fixed(f64),
    /// EM estimate per object, starting from [`DEFAULT_SIGMA`].
    Em,
}

/// Per-object inference parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceSettings {
    /// Prior weight `w`.
    pub weight: f64,
    pub sigma: SigmaMode,
    /// Boundary generator spacing, in meters.
    pub spacing: f64,
}

impl Default for InferenceSettings {
    fn default() -> Self {
        InferenceSettings {
            weight: 1.0,
            sigma: SigmaMode::Fixed(DEFAULT_SIGMA),
            spacing: DEFAULT_SPACING,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInference {
    pub posterior: LabelPosterior,
    pub num_points: usize,
    /// The noise scale used for the posterior.
    pub sigma: f64,
    pub em: Option<NoiseEstimate>,
}

/// Label posterior of one object from its segmented points.
pub fn infer_object(points: &ObjectPoints, label: &BoxParams, settings: &InferenceSettings) -> Result<ObjectInference> {
    let base_sigma = match settings.sigma {
        SigmaMode::Fixed(s) => s,
        SigmaMode::Em => DEFAULT_SIGMA,
    };
    let mut model = GenerativeSurfaceModel::boundary(label, settings.spacing, base_sigma)?;
    let em = match settings.sigma {
        SigmaMode::Em if !points.is_empty() => {
            let est = em_sigma(points, &model, label, &EmOptions::default())?;
            model = model.with_shared_sigma(est.sigma)?;
            Some(est)
        }
        _ => None,
    };
    let prior = GaussianPrior::weighted(label, settings.weight)?;
    Ok(ObjectInference {
        posterior: posterior(points, &model, &prior, label)?,
        num_points: points.len(),
        sigma: em.map_or(base_sigma, |e| e.sigma),
        em,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn car() -> BoxParams {
        BoxParams::bev(0.0, 0.0, 4.0, 2.0, 0.0).unwrap()
    }

    #[test]
    fn single_generator_takes_everything() {
        let model = GenerativeSurfaceModel::new(vec![Generator {
            v0: UnitPoint::bev(0.5, 0.0),
            sigma: 0.2,
        }])
        .unwrap();
        let pts = ObjectPoints::new(vec![Point2::new(3.0, 1.0), Point2::new(-10.0, 4.0)]);
        let reg = registration_weights(&pts, &model, &car());
        assert!(reg.weights().iter().all(|w| *w == 1.0));
    }

    #[test]
    fn equidistant_point_splits_evenly() {
        let model = GenerativeSurfaceModel::new(vec![
            Generator { v0: UnitPoint::bev(0.5, 0.0), sigma: 0.3 },
            Generator { v0: UnitPoint::bev(-0.5, 0.0), sigma: 0.3 },
        ])
        .unwrap();
        let pts = ObjectPoints::new(vec![Point2::new(0.0, 0.7)]);
        let reg = registration_weights(&pts, &model, &car());
        assert_abs_diff_eq!(reg.weights()[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(reg.weights()[(1, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn weights_match_direct_exponentials() {
        let v0s = [UnitPoint::bev(0.5, 0.0), UnitPoint::bev(0.5, 0.5), UnitPoint::bev(0.0, 0.5)];
        let sigma = 0.2;
        let model = GenerativeSurfaceModel::new(v0s.iter().map(|&v0| Generator { v0, sigma }).collect()).unwrap();
        let b = car();
        let x = Point2::new(2.0, 0.0);
        let reg = registration_weights(&ObjectPoints::new(vec![x]), &model, &b);
        // generators sit at (2,0), (2,1), (0,1)
        let d2: [f64; 3] = [0.0, 1.0, 5.0];
        let e: Vec<f64> = d2.iter().map(|d| (-d / (2.0 * sigma * sigma)).exp()).collect();
        let z: f64 = e.iter().sum();
        for j in 0..3 {
            assert_abs_diff_eq!(reg.weights()[(j, 0)], e[j] / z, epsilon = 1e-15);
        }
    }

    #[test]
    fn no_points_returns_prior() {
        let b = car();
        let model = GenerativeSurfaceModel::boundary(&b, 0.1, 0.2).unwrap();
        let prior = GaussianPrior::weighted(&b, 1.0).unwrap();
        let post = posterior(&ObjectPoints::default(), &model, &prior, &b).unwrap();
        assert_eq!(post.covariance, prior.covariance);
        assert_eq!(post.mean, b);
    }

    #[test]
    fn prior_covariance_values() {
        let c = prior_covariance(1.0).unwrap();
        let expected = [0.1936, 0.0121, 0.0625, 0.0625, 0.0289];
        for i in 0..5 {
            assert_abs_diff_eq!(c[(i, i)], expected[i], epsilon = 1e-15);
        }
        let q = prior_covariance(4.0).unwrap();
        assert_abs_diff_eq!((q * 4.0 - c).abs().max(), 0.0, epsilon = 1e-15);
        assert!(prior_covariance(1e12).unwrap().max() < 1e-12);
        assert!(prior_covariance(0.0).is_err());
        assert!(prior_covariance(-1.0).is_err());
    }

    #[test]
    fn non_spd_prior_is_rejected() {
        let mut cov = prior_covariance(1.0).unwrap();
        cov[(0, 0)] = -1.0;
        assert!(GaussianPrior::new(Vec5::zeros(), cov).is_err());
    }

    #[test]
    fn extra_points_on_a_face_tighten_its_edge() {
        let b = car();
        let model = GenerativeSurfaceModel::boundary(&b, 0.1, 0.2).unwrap();
        let prior = GaussianPrior::weighted(&b, 1.0).unwrap();
        let front: Vec<Point2<f64>> = (0..10).map(|i| Point2::new(2.0, -0.9 + 0.2 * i as f64)).collect();
        let side: Vec<Point2<f64>> = (0..10).map(|i| Point2::new(-1.8 + 0.4 * i as f64, 1.0)).collect();
        let edge_var = |pts: Vec<Point2<f64>>| {
            let post = posterior(&ObjectPoints::new(pts), &model, &prior, &b).unwrap();
            // front edge x = c1 + l/2
            let a = Vec5::new(1.0, 0.0, 0.5, 0.0, 0.0);
            (a.transpose() * post.covariance * a)[(0, 0)]
        };
        let base = edge_var([front.clone(), side.clone()].concat());
        let doubled = edge_var([front.clone(), front, side].concat());
        assert!(doubled < base, "{doubled} !< {base}");
    }

    #[test]
    fn em_collapses_to_floor_on_exact_points() {
        let b = car();
        let model = GenerativeSurfaceModel::boundary(&b, 0.1, 0.2).unwrap();
        let pts = ObjectPoints::new(model.locations(&b));
        let est = em_sigma(&pts, &model, &b, &EmOptions::default()).unwrap();
        assert!(est.converged);
        assert_eq!(est.sigma, SIGMA_FLOOR);
    }

    #[test]
    fn em_recovers_synthetic_noise() {
        let b = BoxParams::bev(12.0, -4.0, 4.2, 1.8, 0.4).unwrap();
        let model = GenerativeSurfaceModel::boundary(&b, DEFAULT_SPACING, DEFAULT_SIGMA).unwrap();
        let locs = model.locations(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.2).unwrap();
        let pts: Vec<Point2<f64>> = (0..500)
            .map(|_| {
                let g = locs[rng.random_range(0..locs.len())];
                g + Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng))
            })
            .collect();
        let est = em_sigma(&ObjectPoints::new(pts), &model, &b, &EmOptions::default()).unwrap();
        assert!((est.sigma - 0.2).abs() < 0.02, "sigma {}", est.sigma);
    }

    #[test]
    fn em_requires_points() {
        let b = car();
        let model = GenerativeSurfaceModel::boundary(&b, 0.1, 0.2).unwrap();
        assert!(em_sigma(&ObjectPoints::default(), &model, &b, &EmOptions::default()).is_err());
    }

    #[test]
    fn segmentation_margin() {
        let b = BoxParams::bev(5.0, 5.0, 4.0, 2.0, 0.0).unwrap();
        let eps = 1e-6;
        let cloud = vec![
            Point3::new(5.0, 5.0, 0.3),
            Point3::new(7.0 + 0.1 - eps, 5.0, 0.0),
            Point3::new(7.0 + 0.1 + eps, 5.0, 0.0),
            Point3::new(5.0, 6.0 + 0.1 + eps, 0.0),
        ];
        let seg = segment_points(cloud, &b, 0.1).unwrap();
        assert_eq!(seg.points, vec![Point2::new(5.0, 5.0), Point2::new(7.1 - eps, 5.0)]);
        assert!(segment_points(Vec::new(), &b, -1.0).is_err());
    }

    #[test]
    fn segmentation_count_follows_area() {
        let b = BoxParams::bev(0.0, 0.0, 4.0, 2.0, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40_000;
        let cloud: Vec<Point3<f64>> = (0..n)
            .map(|_| Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.0))
            .collect();
        let seg = segment_points(cloud, &b, 0.1).unwrap();
        let expected = n as f64 * (4.2 * 2.2) / 100.0;
        let sd = (expected * (1.0 - 0.0924)).sqrt();
        assert!((seg.len() as f64 - expected).abs() < 4.0 * sd);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let b = BoxParams::bev(1.0, 2.0, 4.0, 2.0, 0.6).unwrap();
        let v0 = UnitPoint::bev(0.5, -0.3);
        let jac = generator_jacobian(&b, &v0);
        let base = b.bev_vector();
        let h = 1e-6;
        for i in 0..5 {
            let mut p = base;
            let mut q = base;
            p[i] += h;
            q[i] -= h;
            let fp = box_to_world_bev(&b.with_bev_vector(&p), &v0);
            let fq = box_to_world_bev(&b.with_bev_vector(&q), &v0);
            let d = (fp - fq) / (2.0 * h);
            assert_abs_diff_eq!(jac[(0, i)], d.x, epsilon = 1e-7);
            assert_abs_diff_eq!(jac[(1, i)], d.y, epsilon = 1e-7);
        }
    }
}
