//! Infers the posterior of a car label from an L-shaped LiDAR return and
//! shows that the corner facing the sensor is the best constrained.

use nalgebra::Point2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use probbox::eval::l_shape_cloud;
use probbox::geometry::BoxParams;
use probbox::inference::{infer_object, InferenceSettings, SigmaMode};
use probbox::spatial::{corner_total_variance, MomentConfig};

fn main() -> probbox::Result<()> {
    let sensor = Point2::origin();
    let label = BoxParams::bev(14.0, 4.0, 4.3, 1.8, 0.35)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let points = l_shape_cloud(&label, &sensor, 120, 0.05, &mut rng)?;

    for (name, sigma) in [("fixed sigma 0.2 m", SigmaMode::Fixed(0.2)), ("EM sigma", SigmaMode::Em)] {
        let settings = InferenceSettings {
            sigma,
            ..Default::default()
        };
        let inference = infer_object(&points, &label, &settings)?;
        let sd: Vec<String> = (0..5)
            .map(|i| format!("{:.3}", inference.posterior.covariance[(i, i)].sqrt()))
            .collect();
        println!("{name}: sigma {:.3} m, std [cx cy l w yaw] = [{}]", inference.sigma, sd.join(" "));

        let report = corner_total_variance(&inference.posterior, &sensor, &MomentConfig::default())?;
        for c in &report.corners {
            println!("  C{} at {:5.2} m: total variance {:.5} m^2", c.rank, c.distance, c.total_variance);
        }
    }
    Ok(())
}
