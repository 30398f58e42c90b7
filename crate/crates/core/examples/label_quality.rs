//! Ranks labels by three quality scores and measures how well each one
//! separates corrupted labels.

use probbox::data_io::{cvx_hull_iou, num_points_score, DEFAULT_K_MAX};
use probbox::eval::{bad_label_fixture, label_quality_roc};
use probbox::inference::{infer_object, InferenceSettings};
use probbox::jiou::jiou_box_vs_posterior;
use probbox::spatial::{covering_grid, RasterOptions};

fn main() -> probbox::Result<()> {
    let objects = bad_label_fixture(150, 0.25, 4)?;
    let flags: Vec<bool> = objects.iter().map(|o| o.bad).collect();
    let mut jiou_gt = Vec::new();
    for o in &objects {
        let posterior = infer_object(&o.points, &o.label, &InferenceSettings::default())?.posterior;
        let spec = covering_grid(&posterior, 0.1)?;
        jiou_gt.push(jiou_box_vs_posterior(&o.label, &posterior, &spec, &RasterOptions::default())?.value);
    }
    let hull: Vec<f64> = objects.iter().map(|o| cvx_hull_iou(&o.label, &o.points)).collect();
    let count: Vec<f64> = objects.iter().map(|o| num_points_score(&o.points, DEFAULT_K_MAX)).collect();
    for (name, scores) in [("jiou-gt", &jiou_gt), ("cvx-hull-iou", &hull), ("num-points", &count)] {
        println!("{name:>13}: AUC {:.3}", label_quality_roc(scores, &flags)?.auc);
    }
    Ok(())
}
