//! Detection decoding and suppression, the backend contract, and the
//! deterministic synthetic backends.

mod backend;
mod stub;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    create_detector, create_segmenter, BackendDescriptor, BackendKind, DetectContext, Detector,
    RoiCrop, SegmentContext, Segmenter, DETECTOR_INPUT, SEGMENTER_INPUT,
};
pub use stub::{
    render_scene, stub_detector, stub_segmenter, SceneSpec, StubDetector, StubSegmenter,
    SyntheticPolyp,
};

use crate::imaging::{ImagingError, NormalizedBox};

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.5;
pub const DEFAULT_NMS_IOU: f64 = 0.45;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("unknown {kind} backend {name:?} (available: {available})")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },
    #[error("backend {0:?} needs a scene description")]
    MissingScene(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("region {0} lies outside the {1}x{2} frame")]
    RoiOutsideFrame(String, u32, u32),
    #[error("backend failure: {0}")]
    Failed(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// One detector output vector: objectness, box, class probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawCellPrediction {
    pub p_obj: f64,
    pub xc: f64,
    pub yc: f64,
    pub w: f64,
    pub h: f64,
    pub p_class: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub r#box: NormalizedBox,
    pub confidence: f64,
    pub class_id: u32,
}

/// Descending confidence, then smaller `xc`, then smaller `yc`.
pub fn detection_order(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.r#box.xc.total_cmp(&b.r#box.xc))
        .then(a.r#box.yc.total_cmp(&b.r#box.yc))
}

/// Fuses objectness and class probability into a confidence, keeps cells at
/// or above `conf_threshold`, and returns them best first.
///
/// Boxes are clipped to the unit square; a cell whose box vanishes is dropped.
pub fn decode_predictions(cells: &[RawCellPrediction], conf_threshold: f64) -> Vec<Detection> {
    let mut dets: Vec<Detection> = cells
        .iter()
        .filter_map(|c| {
            let confidence = (c.p_obj * c.p_class).clamp(0.0, 1.0);
            if confidence < conf_threshold {
                return None;
            }
            let b = NormalizedBox::from_corners_clipped(
                c.xc - c.w / 2.0,
                c.yc - c.h / 2.0,
                c.xc + c.w / 2.0,
                c.yc + c.h / 2.0,
            )?;
            Some(Detection {
                r#box: b,
                confidence,
                class_id: 0,
            })
        })
        .collect();
    dets.sort_by(detection_order);
    dets
}

pub fn box_iou(a: &NormalizedBox, b: &NormalizedBox) -> f64 {
    a.iou(b)
}

/// Greedy non-maximum suppression. A candidate is dropped when its IoU with
/// an already kept box exceeds `iou_threshold`.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sorted.sort_by(detection_order);
    let mut kept: Vec<Detection> = Vec::with_capacity(sorted.len());
    for d in sorted {
        if kept.iter().all(|k| k.r#box.iou(&d.r#box) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept
}
