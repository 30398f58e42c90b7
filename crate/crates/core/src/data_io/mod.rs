//! Dataset and detection ingestion plus label-quality scores.

pub mod kitti;
pub mod quality;
pub mod records;

pub use kitti::{
    list_frames, load_frame, parse_kitti_label_line, parse_kitti_labels, read_velodyne_bin, write_frame,
    write_velodyne_bin, Calibration, FrameRecord, KittiLabel, LidarPoint,
};
pub use quality::{class_matches, cvx_hull_iou, num_points_score, LengthFilter, DEFAULT_K_MAX};
pub use records::{
    read_detections_jsonl, read_labels_jsonl, write_detections_jsonl, write_labels_jsonl, BoxVariance,
    DetectionRecord, LabelRecord, WeightedBox,
};
