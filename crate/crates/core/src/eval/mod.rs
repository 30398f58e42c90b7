//! Evaluation harness: matching, recall and AP, alignment ablation, label
//! quality ROC, corner variance reports and synthetic fixtures.

pub mod corner;
pub mod matching;
pub mod report;
pub mod roc;
pub mod synthetic;

pub use corner::{corner_tv_report, object_corner_report, CornerTvReport};
pub use matching::{
    alignment_ablation, ap_from_matches, average_precision, greedy_match, match_and_recall, recall_curve,
    score_order, similarity_table, AblationReport, EvalLabel, MatchResult, Metric, MetricOptions, RecallPoint,
    SimilarityTable, AP_POINTS,
};
pub use report::{line_plot_svg, Series, Table};
pub use roc::{label_quality_roc, RocCurve, RocPoint};
pub use synthetic::{
    bad_label_fixture, l_shape_cloud, random_car, synthesize_detections, synthetic_frame, FrameSpec, LabeledObject, NoiseSpec,
    SyntheticFrame,
};
