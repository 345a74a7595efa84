//! Track identity across frames, smoothed size measurement, size classes
//! and the frame-rate meter.

mod fps;
mod measure;
mod risk;
mod tracker;

pub use fps::{fps_from_ticks, FpsMeter, NonMonotonicTick, DEFAULT_FPS_WINDOW};
pub use measure::{
    ema_update, measure, sample_std, MeasurementEstimate, RawMeasurement, DEFAULT_EMA_ALPHA,
    DEFAULT_MARGIN_WINDOW,
};
pub use risk::{classify_risk, CalibrationConfig, CalibrationError, RiskAssessment, SizeClass};
pub use tracker::{associate, Assignment, Observation, Track, Tracker, TrackerConfig};
