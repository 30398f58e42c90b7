//! Writes a synthetic dataset in the KITTI layout, reads it back and infers
//! a label distribution per car.

use probbox::commands::dataset_objects;
use probbox::config::RunConfig;
use probbox::data_io::{write_frame, write_labels_jsonl, LabelRecord};
use probbox::eval::{synthetic_frame, FrameSpec};
use probbox::inference::{infer_object, InferenceSettings};

fn main() -> probbox::Result<()> {
    let root = std::env::temp_dir().join("probbox_kitti");
    for i in 0..3 {
        let frame = synthetic_frame(&format!("{i:06}"), &FrameSpec::default(), i)?;
        write_frame(&root, &frame.frame)?;
    }
    let mut cfg = RunConfig::default();
    cfg.set("dataset", root.to_str().expect("utf-8 path"))?;

    let mut records = Vec::new();
    for o in dataset_objects(&cfg)? {
        let inference = infer_object(&o.points, &o.label, &InferenceSettings::default())?;
        let mut record = LabelRecord::from_posterior(&o.frame, o.object, &o.class, &inference.posterior);
        record.num_points = inference.num_points;
        records.push(record);
    }
    for r in records.iter().take(4) {
        let c = r.covariance.expect("Gaussian record");
        println!("{} #{}: {} points, center std {:.3} m", r.frame, r.object, r.num_points, c[0][0].sqrt());
    }
    let mut out = Vec::new();
    write_labels_jsonl(&mut out, &records)?;
    println!("{} records, {} bytes of JSON lines under {}", records.len(), out.len(), root.display());
    Ok(())
}
