use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::inference::{DEFAULT_CONF_THRESHOLD, DEFAULT_NMS_IOU};
use crate::render::RenderStyle;
use crate::tracking::{CalibrationConfig, TrackerConfig};

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "ENDOSIGHT_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentationMode {
    /// Segment each detection's expanded region separately.
    Roi,
    /// Segment the whole frame once and attribute mask pixels to regions.
    FullFrame,
}

/// How frame timestamps for the FPS meter are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingMode {
    /// Frame `i` is stamped at `i / nominal_fps`; output is reproducible.
    Nominal,
    /// Frames are stamped with the monotonic clock when processing finishes.
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub detector: String,
    pub segmenter: String,
    pub conf_threshold: f64,
    pub nms_iou: f64,
    pub segmentation_mode: SegmentationMode,
    /// Fraction of box width/height added on each side before segmenting.
    pub roi_expand: f64,
    pub mask_threshold: f64,
    /// Canvas padding value for the letterboxed detector input.
    pub letterbox_pad: u8,
    pub tracker: TrackerConfig,
    pub calibration: CalibrationConfig,
    pub render: RenderStyle,
    pub heatmap: bool,
    pub timing: TimingMode,
    pub nominal_fps: f64,
    pub stream_id: String,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detector: "stub".into(),
            segmenter: "stub".into(),
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            nms_iou: DEFAULT_NMS_IOU,
            segmentation_mode: SegmentationMode::Roi,
            roi_expand: 0.1,
            mask_threshold: 0.5,
            letterbox_pad: 114,
            tracker: TrackerConfig::default(),
            calibration: CalibrationConfig::default(),
            render: RenderStyle::default(),
            heatmap: true,
            timing: TimingMode::Nominal,
            nominal_fps: 35.0,
            stream_id: "stream-0".into(),
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        for (name, v) in [
            ("conf_threshold", self.conf_threshold),
            ("nms_iou", self.nms_iou),
            ("mask_threshold", self.mask_threshold),
            ("tracker.iou_min", self.tracker.iou_min),
            ("render.max_opacity", self.render.max_opacity),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if !(self.tracker.ema_alpha > 0.0 && self.tracker.ema_alpha <= 1.0) {
            return bad(format!("tracker.ema_alpha must be in (0, 1], got {}", self.tracker.ema_alpha));
        }
        if !(self.roi_expand >= 0.0 && self.roi_expand.is_finite()) {
            return bad(format!("roi_expand must be non-negative, got {}", self.roi_expand));
        }
        if !(self.nominal_fps > 0.0 && self.nominal_fps.is_finite()) {
            return bad(format!("nominal_fps must be positive, got {}", self.nominal_fps));
        }
        if self.stream_id.is_empty() {
            return bad("stream_id must not be empty".into());
        }
        self.calibration
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    /// Output directory: explicit flag, then config, then `$ENDOSIGHT_OUT`,
    /// then `fallback`.
    pub fn resolve_output_dir(&self, flag: Option<&Path>, fallback: &str) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(fallback))
    }
}
