//! Raster types, the square-canvas preprocessing geometries, coordinate-space
//! mappings and bounding-box format conversions.

mod boxes;
mod io;
mod raster;
mod transform;

pub use boxes::{box_to_yolo, yolo_to_box, NormalizedBox, PixelBox};
pub use io::{load_frame, load_mask, load_probability_map, save_frame, save_mask};
pub use raster::{normalize_pixels, threshold_map, BinaryMask, Frame, NormalizedImage, ProbabilityMap};
pub use transform::{
    apply_transform, apply_transform_with, fit_transform, map_box, resize_mask, unmap_box,
    FitMode, Interpolation, SpaceTransform,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {actual_w}x{actual_h}")]
    DimensionMismatch {
        expected_w: u32,
        expected_h: u32,
        actual_w: u32,
        actual_h: u32,
    },
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("box coordinate {name}={value} outside image {img_w}x{img_h}")]
    BoxOutOfBounds {
        name: &'static str,
        value: f64,
        img_w: u32,
        img_h: u32,
    },
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("degenerate normalized box (w={w}, h={h})")]
    DegenerateBox { w: f64, h: f64 },
    #[error("image i/o on {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

impl ImagingError {
    pub(crate) fn mismatch(expected: (u32, u32), actual: (u32, u32)) -> Self {
        ImagingError::DimensionMismatch {
            expected_w: expected.0,
            expected_h: expected.1,
            actual_w: actual.0,
            actual_h: actual.1,
        }
    }
}
