//! Evaluation engine for label-free, open-world object detection.
//!
//! The crate scores detections that carry free-form labels against annotated
//! ground truth along two independent axes:
//!
//! * [`metrics::caap`]: class-agnostic average precision, where a prediction
//!   is correct when its box overlaps a ground-truth box and labels are ignored.
//! * [`metrics::snap`]: semantic naming average precision, where a prediction
//!   is correct when its label embedding is close to a ground-truth label
//!   embedding in the same image and boxes are ignored.
//!
//! It also provides the unknown-object family (U-AP, U-PRE, U-REC, U-F1),
//! user/generated vocabulary merging, and the file formats used to move
//! ground truth, detections, embeddings and reports around.

pub mod error;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod pr;
pub mod vocab;

pub use error::{Error, Result};
pub use geometry::iou;
pub use matching::{
    cosine_similarity, match_boxes, match_dataset_boxes, match_dataset_labels, match_labels,
    LedgerEntry, MatchLedger,
};
pub use metrics::{caap, snap, unknown_metrics, Counts, MetricReport, OperatingPointValues};
pub use model::{
    default_caap_config, default_snap_config, normalize_label, ApIntegration, BBox, Detection,
    EmbeddingStore, EvalConfig, GroundTruthObject, Interval, IntervalMap, Label, OperatingPoint,
    ScoreGrid,
};
pub use pr::{average_precision, pr_curve, ApResult, PrCurve, PrPoint};
pub use vocab::{merge_vocab, DroppedLabel, KeptLabel, MergeResult, DEFAULT_MERGE_TAU};
