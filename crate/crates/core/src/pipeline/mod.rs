//! The detect-then-segment runtime: per-frame inference, mask unmapping,
//! tracking, measurement, overlay rendering and output files.

mod config;
mod demo;

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{PipelineConfig, SegmentationMode, TimingMode, OUTPUT_ENV};
pub use demo::demo_scene;

use crate::imaging::{
    apply_transform, fit_transform, load_frame, unmap_box, FitMode, Frame, ImagingError, PixelBox,
    ProbabilityMap,
};
use crate::inference::{
    create_detector, create_segmenter, decode_predictions, nms, BackendError, DetectContext,
    Detector, RoiCrop, SceneSpec, SegmentContext, Segmenter, DETECTOR_INPUT, SEGMENTER_INPUT,
};
use crate::render::{
    compose, heatmap_from_prob, AnnotatedFrame, BoxOverlay, PanelRow, PanelSpec, RenderError,
    SequenceIndex, SequenceWriter,
};
use crate::tracking::{
    classify_risk, FpsMeter, NonMonotonicTick, Observation, RawMeasurement, SizeClass, Tracker,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("frame {index}: {source}")]
    Frame {
        index: u64,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("frame {index} ({path}): {source}")]
    Unreadable {
        index: u64,
        path: PathBuf,
        #[source]
        source: ImagingError,
    },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Timing(#[from] NonMonotonicTick),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One row of `tracks.jsonl`: a live track after a frame was processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame: u64,
    pub id: u64,
    /// `[xmin, ymin, xmax, ymax]` in frame pixels.
    pub r#box: [f64; 4],
    pub area_px: f64,
    pub diameter_px: f64,
    pub margin_px: f64,
    pub diameter_mm: Option<f64>,
    pub margin_mm: Option<f64>,
    pub size_class: SizeClass,
    pub confidence: f64,
    pub missed: u32,
}

/// A detection after unmapping to frame space, with its segmentation size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDetection {
    pub r#box: PixelBox,
    pub confidence: f64,
    pub measurement: Option<RawMeasurement>,
    pub track_id: u64,
}

pub struct FrameResult {
    pub annotated: AnnotatedFrame,
    pub detections: Vec<FrameDetection>,
    pub rows: Vec<TrackRow>,
    /// Frame-space probability map assembled from the segmenter outputs.
    pub probability: ProbabilityMap,
    pub fps: f64,
}

/// Copies a segmenter canvas back onto the frame region it came from, keeping
/// the larger value where regions overlap. Returns how many crop pixels
/// reach `threshold`.
fn unmap_probability(
    canvas: &ProbabilityMap,
    crop: &RoiCrop,
    frame_prob: &mut ProbabilityMap,
    threshold: f32,
) -> u64 {
    let t = &crop.transform;
    let xs: Vec<u32> = (0..crop.w)
        .map(|x| t.pad_x + (((x as f64 + 0.5) * t.content_w as f64 / crop.w as f64) as u32).min(t.content_w - 1))
        .collect();
    let mut on = 0;
    for y in 0..crop.h {
        let cy = t.pad_y + (((y as f64 + 0.5) * t.content_h as f64 / crop.h as f64) as u32).min(t.content_h - 1);
        for (x, &cx) in xs.iter().enumerate() {
            let p = canvas.get(cx, cy);
            if p >= threshold {
                on += 1;
            }
            let (fx, fy) = (crop.x0 + x as u32, crop.y0 + y);
            if p > frame_prob.get(fx, fy) {
                frame_prob.set(fx, fy, p);
            }
        }
    }
    on
}

fn count_region(prob: &ProbabilityMap, region: &PixelBox, threshold: f32) -> u64 {
    let (w, h) = prob.dims();
    let Some((x0, y0, rw, rh)) = region.pixel_span(w, h) else {
        return 0;
    };
    let mut on = 0;
    for y in y0..y0 + rh {
        for x in x0..x0 + rw {
            on += (prob.get(x, y) >= threshold) as u64;
        }
    }
    on
}

fn measurement_from_area(area: u64) -> Option<RawMeasurement> {
    (area > 0).then(|| RawMeasurement {
        area_px: area as f64,
        diameter_px: 2.0 * (area as f64 / std::f64::consts::PI).sqrt(),
    })
}

/// Per-stream pipeline state.
pub struct Pipeline {
    cfg: PipelineConfig,
    detector: Box<dyn Detector>,
    segmenter: Box<dyn Segmenter>,
    tracker: Tracker,
    meter: FpsMeter,
    started: Instant,
    next_index: u64,
}

impl Pipeline {
    pub fn new(
        cfg: PipelineConfig,
        detector: Box<dyn Detector>,
        segmenter: Box<dyn Segmenter>,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        Ok(Self {
            tracker: Tracker::new(cfg.tracker),
            cfg,
            detector,
            segmenter,
            meter: FpsMeter::default(),
            started: Instant::now(),
            next_index: 0,
        })
    }

    /// Resolves the configured backends by name.
    pub fn from_config(cfg: PipelineConfig, scene: Option<&SceneSpec>) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let detector = create_detector(&cfg.detector, scene)?;
        let segmenter = create_segmenter(&cfg.segmenter, scene)?;
        Self::new(cfg, detector, segmenter)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn meter(&self) -> &FpsMeter {
        &self.meter
    }

    pub fn frames_processed(&self) -> u64 {
        self.next_index
    }

    fn detect(&mut self, frame: &Frame, index: u64) -> Result<Vec<(PixelBox, f64)>, PipelineError> {
        let (fw, fh) = frame.dims();
        let t = fit_transform(fw, fh, DETECTOR_INPUT, FitMode::Letterbox);
        let canvas = apply_transform(frame, &t, self.cfg.letterbox_pad)?;
        let cells = self.detector.detect(&canvas, &DetectContext { frame_index: index, transform: t })?;
        let dets = nms(&decode_predictions(&cells, self.cfg.conf_threshold), self.cfg.nms_iou);
        let side = t.target as f64;
        Ok(dets
            .iter()
            .filter_map(|d| {
                let [x0, y0, x1, y1] = d.r#box.corners();
                let canvas_box = PixelBox::from_corners_unchecked(x0 * side, y0 * side, x1 * side, y1 * side);
                let b = unmap_box(&canvas_box, &t);
                (!b.is_degenerate()).then_some((b, d.confidence))
            })
            .collect())
    }

    fn segment(
        &mut self,
        frame: &Frame,
        index: u64,
        crop: RoiCrop,
    ) -> Result<ProbabilityMap, PipelineError> {
        let (fw, fh) = frame.dims();
        let region = frame.crop(crop.x0, crop.y0, crop.w, crop.h)?;
        let input = apply_transform(&region, &crop.transform, 0)?;
        let ctx = SegmentContext {
            frame_index: index,
            frame_w: fw,
            frame_h: fh,
            crop,
        };
        Ok(self.segmenter.segment(&input, &ctx)?)
    }

    /// Runs one frame through every stage. Frames must be fed in order.
    pub fn process_frame(&mut self, frame: &Frame) -> Result<FrameResult, PipelineError> {
        let index = self.next_index;
        self.process_inner(frame, index).map_err(|e| PipelineError::Frame {
            index,
            source: Box::new(e),
        })
    }

    fn process_inner(&mut self, frame: &Frame, index: u64) -> Result<FrameResult, PipelineError> {
        let (fw, fh) = frame.dims();
        let thr = self.cfg.mask_threshold as f32;
        let boxes = self.detect(frame, index)?;
        let mut prob = ProbabilityMap::zeros(fw, fh);
        let mut areas = Vec::with_capacity(boxes.len());
        match self.cfg.segmentation_mode {
            SegmentationMode::Roi => {
                for (b, _) in &boxes {
                    let roi = b.expand(self.cfg.roi_expand, fw, fh);
                    let area = match RoiCrop::new(&roi, fw, fh, SEGMENTER_INPUT) {
                        Some(crop) => {
                            let canvas = self.segment(frame, index, crop)?;
                            unmap_probability(&canvas, &crop, &mut prob, thr)
                        }
                        None => 0,
                    };
                    areas.push(area);
                }
            }
            SegmentationMode::FullFrame => {
                if !boxes.is_empty() {
                    let crop = RoiCrop::full_frame(fw, fh, SEGMENTER_INPUT);
                    let canvas = self.segment(frame, index, crop)?;
                    unmap_probability(&canvas, &crop, &mut prob, thr);
                }
                for (b, _) in &boxes {
                    areas.push(count_region(&prob, &b.expand(self.cfg.roi_expand, fw, fh), thr));
                }
            }
        }

        let obs: Vec<Observation> = boxes
            .iter()
            .zip(&areas)
            .map(|(&(b, confidence), &area)| Observation {
                r#box: b,
                confidence,
                measurement: measurement_from_area(area),
            })
            .collect();
        let ids = self.tracker.step(&obs);
        let detections: Vec<FrameDetection> = obs
            .iter()
            .zip(&ids)
            .map(|(o, &track_id)| FrameDetection {
                r#box: o.r#box,
                confidence: o.confidence,
                measurement: o.measurement,
                track_id,
            })
            .collect();

        let calib = self.cfg.calibration;
        let rows: Vec<TrackRow> = self
            .tracker
            .tracks()
            .iter()
            .map(|t| {
                let risk = classify_risk(&t.measurement, &calib);
                TrackRow {
                    frame: index,
                    id: t.id,
                    r#box: [t.r#box.xmin, t.r#box.ymin, t.r#box.xmax, t.r#box.ymax],
                    area_px: t.measurement.area_smoothed,
                    diameter_px: t.measurement.diameter_smoothed,
                    margin_px: t.measurement.margin_diameter,
                    diameter_mm: risk.diameter_mm,
                    margin_mm: risk.margin_mm,
                    size_class: risk.size_class,
                    confidence: t.last_confidence,
                    missed: t.missed,
                }
            })
            .collect();

        // The meter is ticked before the panel is drawn so the panel shows
        // the rate including this frame.
        let stamp = match self.cfg.timing {
            TimingMode::Nominal => index as f64 / self.cfg.nominal_fps,
            TimingMode::Wall => self.started.elapsed().as_secs_f64(),
        };
        let fps = self.meter.tick(stamp)?;

        let panel = PanelSpec {
            fps,
            rows: rows
                .iter()
                .map(|r| PanelRow {
                    id: r.id,
                    size_class: r.size_class,
                    diameter: r.diameter_mm.unwrap_or(r.diameter_px),
                    margin: r.margin_mm.unwrap_or(r.margin_px),
                    unit: if r.diameter_mm.is_some() { "mm" } else { "px" }.into(),
                    confidence: r.confidence,
                })
                .collect(),
        };
        let overlays: Vec<BoxOverlay> = detections
            .iter()
            .map(|d| BoxOverlay {
                r#box: d.r#box,
                confidence: d.confidence,
                id: d.track_id,
            })
            .collect();
        let heat = self
            .cfg
            .heatmap
            .then(|| heatmap_from_prob(&prob, self.cfg.render.max_opacity));
        let composed = compose(frame, heat.as_ref(), &overlays, Some(&panel), &self.cfg.render)?;

        self.next_index += 1;
        Ok(FrameResult {
            annotated: AnnotatedFrame {
                frame: composed,
                frame_index: index,
                stream_id: self.cfg.stream_id.clone(),
            },
            detections,
            rows,
            probability: prob,
            fps,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub frames: u64,
    pub track_ids: BTreeSet<u64>,
    /// Final reading of the pipeline's FPS meter.
    pub meter_fps: f64,
    /// Frames per second over the whole run, measured with the wall clock.
    pub wall_fps: f64,
    pub index: SequenceIndex,
}

/// Processes `frames` in order and writes `<out>/frames/NNNNNN.png`,
/// `<out>/index.json` and `<out>/tracks.jsonl`.
pub fn run_pipeline<I>(
    frames: I,
    pipeline: &mut Pipeline,
    out_dir: &Path,
) -> Result<PipelineSummary, PipelineError>
where
    I: IntoIterator<Item = Result<Frame, PipelineError>>,
{
    let start = Instant::now();
    let fps_for_index = pipeline.cfg.nominal_fps;
    let mut writer = SequenceWriter::create(out_dir, &pipeline.cfg.stream_id, fps_for_index)?;
    let tracks_path = out_dir.join("tracks.jsonl");
    let io = |source| PipelineError::Io {
        path: tracks_path.clone(),
        source,
    };
    let mut tracks = BufWriter::new(File::create(&tracks_path).map_err(io)?);
    let mut ids = BTreeSet::new();
    for frame in frames {
        let frame = frame?;
        let r = pipeline.process_frame(&frame)?;
        writer.write(&r.annotated)?;
        for row in &r.rows {
            ids.insert(row.id);
            let line = serde_json::to_string(row).expect("row serializes");
            writeln!(tracks, "{line}").map_err(io)?;
        }
    }
    tracks.flush().map_err(io)?;
    let elapsed = start.elapsed().as_secs_f64();
    let n = pipeline.frames_processed();
    let meter_fps = pipeline.meter.fps();
    if pipeline.cfg.timing == TimingMode::Wall && meter_fps > 0.0 {
        writer.set_fps(meter_fps);
    }
    let index = writer.close()?;
    Ok(PipelineSummary {
        frames: n,
        track_ids: ids,
        meter_fps,
        wall_fps: if elapsed > 0.0 { n as f64 / elapsed } else { 0.0 },
        index,
    })
}

/// Image files in `dir` (PNG or JPEG), sorted by file name.
pub fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let io = |source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Lazily loads frames from `paths`, reporting the index of an unreadable one.
pub fn load_frames(paths: Vec<PathBuf>) -> impl Iterator<Item = Result<Frame, PipelineError>> {
    paths.into_iter().enumerate().map(|(i, path)| {
        load_frame(&path).map_err(|source| PipelineError::Unreadable {
            index: i as u64,
            path,
            source,
        })
    })
}

/// Frames rendered from a synthetic scene.
pub fn scene_frames(
    scene: &SceneSpec,
    count: u64,
    width: u32,
    height: u32,
) -> impl Iterator<Item = Result<Frame, PipelineError>> + '_ {
    (0..count).map(move |i| Ok(crate::inference::render_scene(scene, i, width, height)))
}
