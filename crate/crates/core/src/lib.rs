//! Two-stage polyp analysis runtime and evaluation toolkit.
//!
//! Frames are letterboxed into a detector backend, detections are decoded and
//! suppressed, each region is segmented at higher resolution, and the
//! resulting masks feed a tracker that smooths size measurements and assigns
//! clinical size classes. The crate also carries the segmentation/detection
//! metric suite, dataset tooling, overlay rendering, and a thermal-aware job
//! supervisor.

pub mod imaging;
pub mod dataset;
pub mod inference;
pub mod metrics;
pub mod tracking;
pub mod render;
pub mod supervisor;
pub mod pipeline;
