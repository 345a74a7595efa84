//! Deterministic synthetic backends driven by an analytic scene of
//! elliptical polyps moving at constant velocity.

use serde::{Deserialize, Serialize};

use super::backend::{
    BackendDescriptor, BackendKind, DetectContext, Detector, RoiCrop, SegmentContext, Segmenter,
    DETECTOR_INPUT, SEGMENTER_INPUT,
};
use super::{BackendError, RawCellPrediction};
use crate::imaging::{Frame, PixelBox, ProbabilityMap};

const STUB_P_CLASS: f64 = 0.95;

/// One synthetic polyp. Coordinates are fractions of the frame size; `radii`
/// are semi-axes relative to width and height respectively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPolyp {
    pub center: [f64; 2],
    pub radii: [f64; 2],
    pub intensity: f64,
    #[serde(default)]
    pub velocity: [f64; 2],
}

impl SyntheticPolyp {
    pub fn center_at(&self, frame_index: u64) -> (f64, f64) {
        let f = frame_index as f64;
        (
            self.center[0] + self.velocity[0] * f,
            self.center[1] + self.velocity[1] * f,
        )
    }

    /// Stub probability at frame pixel coordinate `(x, y)`.
    #[inline]
    fn probability(&self, frame_index: u64, x: f64, y: f64, frame_w: u32, frame_h: u32) -> f64 {
        let (cx, cy) = self.center_at(frame_index);
        let a = self.radii[0] * frame_w as f64;
        let b = self.radii[1] * frame_h as f64;
        let dx = (x - cx * frame_w as f64) / a;
        let dy = (y - cy * frame_h as f64) / b;
        let d = (dx * dx + dy * dy).sqrt();
        (1.0 - d).clamp(0.0, 1.0) * self.intensity
    }

    /// Equivalent-circle diameter, in frame pixels, of the region where the
    /// stub probability reaches `tau`.
    pub fn thresholded_diameter_px(&self, frame_w: u32, frame_h: u32, tau: f64) -> f64 {
        let a = self.radii[0] * frame_w as f64;
        let b = self.radii[1] * frame_h as f64;
        let k = (1.0 - tau / self.intensity).max(0.0);
        2.0 * (a * b).sqrt() * k
    }
}

/// A scene is serialized as a bare JSON list of polyps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneSpec {
    pub polyps: Vec<SyntheticPolyp>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), BackendError> {
        for (i, p) in self.polyps.iter().enumerate() {
            let unit = |v: f64| (0.0..=1.0).contains(&v);
            if !p.center.iter().all(|&v| unit(v)) {
                return Err(BackendError::InvalidScene(format!("polyp {i}: center outside [0,1]")));
            }
            if !p.radii.iter().all(|&v| unit(v) && v > 0.0) {
                return Err(BackendError::InvalidScene(format!("polyp {i}: radii must be in (0,1]")));
            }
            if !unit(p.intensity) {
                return Err(BackendError::InvalidScene(format!("polyp {i}: intensity outside [0,1]")));
            }
            if !p.velocity.iter().all(|v| v.is_finite()) {
                return Err(BackendError::InvalidScene(format!("polyp {i}: non-finite velocity")));
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, BackendError> {
        let scene: SceneSpec = serde_json::from_slice(bytes)
            .map_err(|e| BackendError::InvalidScene(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }
}

/// Raw predictions in scene (original frame) normalized coordinates: one
/// cell per polyp whose bounding box is still on screen.
pub fn stub_detector(scene: &SceneSpec, frame_index: u64) -> Vec<RawCellPrediction> {
    scene
        .polyps
        .iter()
        .filter_map(|p| {
            let (cx, cy) = p.center_at(frame_index);
            let x0 = (cx - p.radii[0]).max(0.0);
            let y0 = (cy - p.radii[1]).max(0.0);
            let x1 = (cx + p.radii[0]).min(1.0);
            let y1 = (cy + p.radii[1]).min(1.0);
            (x1 > x0 && y1 > y0).then(|| RawCellPrediction {
                p_obj: 0.5 + 0.5 * p.intensity,
                xc: (x0 + x1) / 2.0,
                yc: (y0 + y1) / 2.0,
                w: x1 - x0,
                h: y1 - y0,
                p_class: STUB_P_CLASS,
            })
        })
        .collect()
}

/// Probability map over the segmenter canvas for the crop of `roi`.
///
/// The roi is expressed in frame pixels and must overlap the frame.
pub fn stub_segmenter(
    scene: &SceneSpec,
    roi: &PixelBox,
    frame_w: u32,
    frame_h: u32,
    frame_index: u64,
    side: u32,
) -> Result<ProbabilityMap, BackendError> {
    let inside = roi.xmin >= 0.0
        && roi.ymin >= 0.0
        && roi.xmax <= frame_w as f64
        && roi.ymax <= frame_h as f64;
    let crop = RoiCrop::new(roi, frame_w, frame_h, side).filter(|_| inside).ok_or_else(|| {
        BackendError::RoiOutsideFrame(
            format!("({}, {}, {}, {})", roi.xmin, roi.ymin, roi.xmax, roi.ymax),
            frame_w,
            frame_h,
        )
    })?;
    Ok(segment_crop(scene, &crop, frame_w, frame_h, frame_index))
}

fn segment_crop(
    scene: &SceneSpec,
    crop: &RoiCrop,
    frame_w: u32,
    frame_h: u32,
    frame_index: u64,
) -> ProbabilityMap {
    let t = &crop.transform;
    let mut map = ProbabilityMap::zeros(t.target, t.target);
    if scene.polyps.is_empty() {
        return map;
    }
    for cy in t.pad_y..t.pad_y + t.content_h {
        for cx in t.pad_x..t.pad_x + t.content_w {
            let (x, y) = crop.canvas_pixel_to_frame(cx, cy);
            let p = scene
                .polyps
                .iter()
                .map(|s| s.probability(frame_index, x, y, frame_w, frame_h))
                .fold(0.0, f64::max);
            if p > 0.0 {
                map.set(cx, cy, p as f32);
            }
        }
    }
    map
}

/// Synthesizes an RGB frame for `scene`: a smooth tissue-toned background
/// with each polyp shaded by its stub probability. Uses only exact
/// arithmetic so output bytes are platform independent.
pub fn render_scene(scene: &SceneSpec, frame_index: u64, width: u32, height: u32) -> Frame {
    let mut data = Vec::with_capacity(width as usize * height as usize * 3);
    for y in 0..height {
        let fy = y as f64 / height.max(2) as f64;
        for x in 0..width {
            let fx = x as f64 / width.max(2) as f64;
            let bg = [
                150.0 + 40.0 * fx,
                70.0 + 25.0 * fy,
                60.0 + 20.0 * (1.0 - fx),
            ];
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let p = scene
                .polyps
                .iter()
                .map(|s| s.probability(frame_index, px, py, width, height))
                .fold(0.0, f64::max);
            let fg = [235.0, 150.0, 120.0];
            for c in 0..3 {
                let v = bg[c] + (fg[c] - bg[c]) * p.min(1.0);
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Frame::new(width, height, data).expect("dimensions are consistent")
}

/// Detector backend wrapping [`stub_detector`]; maps scene coordinates onto
/// the letterboxed canvas using the call's transform.
pub struct StubDetector {
    scene: SceneSpec,
}

impl StubDetector {
    pub fn new(scene: SceneSpec) -> Result<Self, BackendError> {
        scene.validate()?;
        Ok(Self { scene })
    }
}

impl Detector for StubDetector {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            name: "stub".into(),
            kind: BackendKind::Detector,
            input_side: DETECTOR_INPUT,
            deterministic: true,
        }
    }

    fn detect(
        &mut self,
        _input: &Frame,
        ctx: &DetectContext,
    ) -> Result<Vec<RawCellPrediction>, BackendError> {
        let t = &ctx.transform;
        let (fw, fh, side) = (t.src_w as f64, t.src_h as f64, t.target as f64);
        Ok(stub_detector(&self.scene, ctx.frame_index)
            .into_iter()
            .map(|c| {
                let (x0, y0) = t.source_to_canvas((c.xc - c.w / 2.0) * fw, (c.yc - c.h / 2.0) * fh);
                let (x1, y1) = t.source_to_canvas((c.xc + c.w / 2.0) * fw, (c.yc + c.h / 2.0) * fh);
                RawCellPrediction {
                    xc: (x0 + x1) / 2.0 / side,
                    yc: (y0 + y1) / 2.0 / side,
                    w: (x1 - x0) / side,
                    h: (y1 - y0) / side,
                    ..c
                }
            })
            .collect())
    }
}

pub struct StubSegmenter {
    scene: SceneSpec,
}

impl StubSegmenter {
    pub fn new(scene: SceneSpec) -> Result<Self, BackendError> {
        scene.validate()?;
        Ok(Self { scene })
    }
}

impl Segmenter for StubSegmenter {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            name: "stub".into(),
            kind: BackendKind::Segmenter,
            input_side: SEGMENTER_INPUT,
            deterministic: true,
        }
    }

    fn segment(&mut self, _input: &Frame, ctx: &SegmentContext) -> Result<ProbabilityMap, BackendError> {
        Ok(segment_crop(
            &self.scene,
            &ctx.crop,
            ctx.frame_w,
            ctx.frame_h,
            ctx.frame_index,
        ))
    }
}
