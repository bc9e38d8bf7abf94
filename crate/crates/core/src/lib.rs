//! Non-neural core of a road-damage detection pipeline: box geometry, RPN
//! anchors and box deltas, greedy suppression, RoIAlign pooling, and
//! class-matched F1 evaluation at a fixed IoU threshold, plus the file formats
//! that feed them.

pub mod anchors;
pub mod boxgeom;
pub mod evaluate;
pub mod ingest;
pub mod roialign;
pub mod suppress;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use anchors::{decode_deltas, encode_deltas, generate_anchors, AnchorConfig, BoxDelta};
pub use boxgeom::{BBox, ClassLabel, Detection, GeometryError, GroundTruthBox};
pub use evaluate::{evaluate_dataset, match_image, EvalReport, ImageSample, IouCriterion, MatchConfig};
pub use roialign::{roi_align, FeatureMap, PoolMode, RoiAlignParams};
pub use suppress::{nms, paper_postprocess, top_n, SuppressionConfig};
