use serde::{Deserialize, Serialize};

use super::stub::{SceneSpec, StubDetector, StubSegmenter};
use super::{BackendError, RawCellPrediction};
use crate::imaging::{fit_transform, FitMode, Frame, PixelBox, ProbabilityMap, SpaceTransform};

/// Square input side of the detector stage.
pub const DETECTOR_INPUT: u32 = 416;
/// Square input side of the segmenter stage.
pub const SEGMENTER_INPUT: u32 = 320;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Detector,
    Segmenter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub kind: BackendKind,
    pub input_side: u32,
    pub deterministic: bool,
}

/// Per-call information handed to a detector alongside its letterboxed input.
#[derive(Debug, Clone, Copy)]
pub struct DetectContext {
    pub frame_index: u64,
    /// Original frame to model canvas.
    pub transform: SpaceTransform,
}

/// A rectangular crop of the original frame prepared for the segmenter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiCrop {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
    /// Crop to segmenter canvas.
    pub transform: SpaceTransform,
}

impl RoiCrop {
    /// Integer crop covering `roi`, clamped to the frame. `None` when the
    /// clamped region is empty.
    pub fn new(roi: &PixelBox, frame_w: u32, frame_h: u32, side: u32) -> Option<Self> {
        let (x0, y0, w, h) = roi.pixel_span(frame_w, frame_h)?;
        Some(Self {
            x0,
            y0,
            w,
            h,
            transform: fit_transform(w, h, side, FitMode::ThumbnailCenter),
        })
    }

    pub fn full_frame(frame_w: u32, frame_h: u32, side: u32) -> Self {
        Self {
            x0: 0,
            y0: 0,
            w: frame_w,
            h: frame_h,
            transform: fit_transform(frame_w, frame_h, side, FitMode::ThumbnailCenter),
        }
    }

    /// Frame-space coordinate of the center of canvas content pixel `(cx, cy)`.
    #[inline]
    pub fn canvas_pixel_to_frame(&self, cx: u32, cy: u32) -> (f64, f64) {
        let t = &self.transform;
        let rx = self.w as f64 / t.content_w as f64;
        let ry = self.h as f64 / t.content_h as f64;
        (
            self.x0 as f64 + ((cx - t.pad_x) as f64 + 0.5) * rx,
            self.y0 as f64 + ((cy - t.pad_y) as f64 + 0.5) * ry,
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SegmentContext {
    pub frame_index: u64,
    pub frame_w: u32,
    pub frame_h: u32,
    pub crop: RoiCrop,
}

/// Detector stage: a letterboxed `input_side` square in, raw cell
/// predictions in model-canvas normalized coordinates out.
pub trait Detector: Send {
    fn descriptor(&self) -> BackendDescriptor;
    fn detect(
        &mut self,
        input: &Frame,
        ctx: &DetectContext,
    ) -> Result<Vec<RawCellPrediction>, BackendError>;
}

/// Segmenter stage: a thumbnail-centered `input_side` square in, a
/// probability map of the same size out.
pub trait Segmenter: Send {
    fn descriptor(&self) -> BackendDescriptor;
    fn segment(&mut self, input: &Frame, ctx: &SegmentContext) -> Result<ProbabilityMap, BackendError>;
}

const DETECTORS: &[&str] = &["stub"];
const SEGMENTERS: &[&str] = &["stub"];

pub fn create_detector(
    name: &str,
    scene: Option<&SceneSpec>,
) -> Result<Box<dyn Detector>, BackendError> {
    match name {
        "stub" => {
            let scene = scene.ok_or_else(|| BackendError::MissingScene(name.into()))?;
            Ok(Box::new(StubDetector::new(scene.clone())?))
        }
        _ => Err(BackendError::Unknown {
            kind: "detector",
            name: name.into(),
            available: DETECTORS.join(", "),
        }),
    }
}

pub fn create_segmenter(
    name: &str,
    scene: Option<&SceneSpec>,
) -> Result<Box<dyn Segmenter>, BackendError> {
    match name {
        "stub" => {
            let scene = scene.ok_or_else(|| BackendError::MissingScene(name.into()))?;
            Ok(Box::new(StubSegmenter::new(scene.clone())?))
        }
        _ => Err(BackendError::Unknown {
            kind: "segmenter",
            name: name.into(),
            available: SEGMENTERS.join(", "),
        }),
    }
}
