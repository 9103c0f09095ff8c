//! Rotated-box people detection toolkit: box geometry and IoU, the detection
//! head codec, periodic angle losses, rotated NMS, AP50 evaluation, data
//! files with a synthetic scene generator, and a gradient-descent demo.

pub mod codec;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod loss;
pub mod math;
pub mod postprocess;
pub mod trainer;

pub use codec::{
    decode, encode_raw, encode_targets, Anchor, AnchorSet, CodecParams, GridSpec, HeadLayout, LayoutConfig,
    RawPrediction, RawPredictions, SlotIndex, Targets,
};
pub use error::{Error, Result};
pub use eval::{
    aspect_ratio_histogram, average_precision, evaluate, fixed_threshold_metrics, match_frame, EvalConfig,
    EvalReport, FrameEval, Prf,
};
pub use geometry::{angular_error, iou, ConvexQuad, Point, RotatedBox};
pub use io::{
    generate_scene, load_annotations, load_predictions, save_annotations, save_predictions, AnnotationSet,
    PredictionSet, SynthConfig,
};
pub use loss::{angle_loss, angle_loss_grad, assign, total_loss, AngleLossKind, Assignment, LossConfig, WhLoss};
pub use postprocess::{nms, Detection, NmsConfig};
pub use trainer::{fit, finite_diff_check, synthetic_ablation, AblationConfig, FitConfig, FitInit, Trajectory};
