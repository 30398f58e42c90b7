//! Synthetic detectors, LiDAR clouds and label fixtures standing in for
//! trained networks and full datasets.

use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data_io::{BoxVariance, Calibration, DetectionRecord, FrameRecord, LidarPoint};
use crate::error::{Error, Result};
use crate::geometry::{align_box, local_to_world_bev, AlignMode, BoxParams};
use crate::inference::ObjectPoints;

/// Perturbed sizes never drop below this fraction of the label size.
const MIN_SIZE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Standard deviations over `[cx, cy, l, w, yaw]`.
    pub sigma: [f64; 5],
    /// What stays fixed when the size is perturbed.
    pub anchor: AlignMode,
    /// Emitted variances are `sigma^2 * variance_scale`; zero emits none.
    pub variance_scale: f64,
    /// Sensor position used by corner anchoring.
    pub observer: Point2<f64>,
}

impl NoiseSpec {
    pub fn center(sigma: f64) -> Self {
        NoiseSpec {
            sigma: [sigma, sigma, 0.0, 0.0, 0.0],
            anchor: AlignMode::Center,
            variance_scale: 1.0,
            observer: Point2::origin(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::param("sigma", "must be finite and non-negative"));
        }
        if !(self.variance_scale >= 0.0) || !self.variance_scale.is_finite() {
            return Err(Error::param("variance_scale", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// One detection per label in input order. Scores are `exp(-|noise|^2)`
/// over the raw parameter noise, so a noiseless detection scores 1.
pub fn synthesize_detections(
    labels: &[(String, String, BoxParams)],
    spec: &NoiseSpec,
    seed: u64,
) -> Result<Vec<DetectionRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let var = (spec.variance_scale > 0.0).then(|| {
        let v = spec.sigma.map(|s| s * s * spec.variance_scale);
        BoxVariance {
            cx: v[0],
            cy: v[1],
            cz: 0.0,
            l: v[2],
            w: v[3],
            h: 0.0,
            yaw: v[4],
        }
    });
    labels
        .iter()
        .map(|(frame, class, label)| {
            let noise: [f64; 5] = std::array::from_fn(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * spec.sigma[i]
            });
            let posed = BoxParams {
                c1: label.c1 + noise[0],
                c2: label.c2 + noise[1],
                ..*label
            };
            let posed = BoxParams::new(posed.c1, posed.c2, posed.c3, posed.l, posed.w, posed.h, posed.yaw + noise[4])?;
            let sized = BoxParams {
                l: (label.l + noise[2]).max(MIN_SIZE_FRACTION * label.l),
                w: (label.w + noise[3]).max(MIN_SIZE_FRACTION * label.w),
                ..posed
            };
            let bbox = align_box(&posed, &sized, spec.anchor, &spec.observer);
            Ok(DetectionRecord {
                frame: frame.clone(),
                class: class.clone(),
                score: (-noise.iter().map(|n| n * n).sum::<f64>()).exp(),
                bbox,
                var,
            })
        })
        .collect()
}

/// Points on the faces of `b` visible from `observer`, spread uniformly by
/// face length, with isotropic Gaussian noise.
pub fn l_shape_cloud<R: Rng>(
    b: &BoxParams,
    observer: &Point2<f64>,
    count: usize,
    noise: f64,
    rng: &mut R,
) -> Result<ObjectPoints> {
    b.validate()?;
    let normal = Normal::new(0.0, noise).map_err(|_| Error::param("noise", "must be finite and non-negative"))?;
    let (hl, hw) = (0.5 * b.l, 0.5 * b.w);
    // (face center, along-face half extent direction) in local meters.
    let faces = [
        (Vector2::new(hl, 0.0), Vector2::new(0.0, hw)),
        (Vector2::new(-hl, 0.0), Vector2::new(0.0, hw)),
        (Vector2::new(0.0, hw), Vector2::new(hl, 0.0)),
        (Vector2::new(0.0, -hw), Vector2::new(hl, 0.0)),
    ];
    let local_observer = b.to_local_bev(observer);
    let visible: Vec<_> = faces
        .iter()
        .filter(|(c, _)| c.dot(&(local_observer - c)) > 0.0)
        .collect();
    if visible.is_empty() {
        return Err(Error::Input("observer lies inside the box".into()));
    }
    let lengths: Vec<f64> = visible.iter().map(|(_, d)| 2.0 * d.norm()).collect();
    let total: f64 = lengths.iter().sum();
    let points = (0..count)
        .map(|_| {
            let mut s = rng.random_range(0.0..total);
            let mut f = 0;
            while f + 1 < lengths.len() && s >= lengths[f] {
                s -= lengths[f];
                f += 1;
            }
            let (c, d) = visible[f];
            let local = c + d * (2.0 * s / lengths[f] - 1.0);
            let p = local_to_world_bev(b, &local);
            Point2::new(p.x + normal.sample(rng), p.y + normal.sample(rng))
        })
        .collect();
    Ok(ObjectPoints::new(points))
}

/// Random car-sized box within `range` meters ahead of the origin, not too
/// close to the sensor.
pub fn random_car<R: Rng>(rng: &mut R, range: f64) -> BoxParams {
    loop {
        let c1 = rng.random_range(5.0..range.max(6.0));
        let c2 = rng.random_range(-0.5 * range..0.5 * range);
        let b = BoxParams::new(
            c1,
            c2,
            -0.9,
            rng.random_range(3.6..4.8),
            rng.random_range(1.6..2.0),
            rng.random_range(1.4..1.7),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        )
        .expect("sampled dimensions are positive");
        if c1.hypot(c2) > 5.0 {
            return b;
        }
    }
}

fn overlaps_any(b: &BoxParams, others: &[BoxParams]) -> bool {
    others
        .iter()
        .any(|o| (b.center_bev() - o.center_bev()).norm() < b.radius_bev() + o.radius_bev() + 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    pub cars: usize,
    pub points_per_car: usize,
    /// Gaussian noise of LiDAR returns, in meters.
    pub noise: f64,
    /// Share of labels that are starved of points and shifted off the car.
    pub bad_fraction: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec {
            cars: 6,
            points_per_car: 150,
            noise: 0.03,
            bad_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub frame: FrameRecord,
    /// Boxes the points were drawn from; labels differ where `bad` is set.
    pub truth: Vec<BoxParams>,
    pub bad: Vec<bool>,
}

fn shifted_label<R: Rng>(truth: &BoxParams, rng: &mut R) -> BoxParams {
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    BoxParams {
        c1: truth.c1 + 0.8 * angle.cos(),
        c2: truth.c2 + 0.8 * angle.sin(),
        ..*truth
    }
}

/// A KITTI-style frame of non-overlapping cars seen by a sensor at the
/// origin, with L-shaped returns and the nominal calibration.
pub fn synthetic_frame(id: &str, spec: &FrameSpec, seed: u64) -> Result<SyntheticFrame> {
    if !(0.0..=1.0).contains(&spec.bad_fraction) {
        return Err(Error::param("bad_fraction", "must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth: Vec<BoxParams> = Vec::with_capacity(spec.cars);
    while truth.len() < spec.cars {
        let b = random_car(&mut rng, 40.0);
        if !overlaps_any(&b, &truth) {
            truth.push(b);
        }
    }
    let mut points = Vec::new();
    let mut labels = Vec::with_capacity(truth.len());
    let mut bad = Vec::with_capacity(truth.len());
    for b in &truth {
        let is_bad = rng.random_bool(spec.bad_fraction);
        let count = if is_bad { (spec.points_per_car / 10).max(3) } else { spec.points_per_car };
        for p in l_shape_cloud(b, &Point2::origin(), count, spec.noise, &mut rng)?.points {
            points.push(LidarPoint {
                x: p.x as f32,
                y: p.y as f32,
                z: (b.c3 + rng.random_range(-0.4..0.4) * b.h) as f32,
                intensity: 0.5,
            });
        }
        labels.push(("Car".to_string(), if is_bad { shifted_label(b, &mut rng) } else { *b }));
        bad.push(is_bad);
    }
    Ok(SyntheticFrame {
        frame: FrameRecord {
            id: id.to_string(),
            points,
            labels,
            calibration: Calibration::identity(),
        },
        truth,
        bad,
    })
}

/// Object with its points and whether the label is corrupted.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledObject {
    pub label: BoxParams,
    pub points: ObjectPoints,
    pub bad: bool,
}

/// Objects of which a `bad_fraction` share are starved of points and have
/// their label shifted off the observed surface.
pub fn bad_label_fixture(count: usize, bad_fraction: f64, seed: u64) -> Result<Vec<LabeledObject>> {
    if !(0.0..=1.0).contains(&bad_fraction) {
        return Err(Error::param("bad_fraction", "must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let truth = random_car(&mut rng, 40.0);
            let bad = rng.random_bool(bad_fraction);
            let k = if bad { rng.random_range(3..40) } else { rng.random_range(60..400) };
            let points = l_shape_cloud(&truth, &Point2::origin(), k, 0.05, &mut rng)?;
            let label = if bad { shifted_label(&truth, &mut rng) } else { truth };
            Ok(LabeledObject { label, points, bad })
        })
        .collect()
}
