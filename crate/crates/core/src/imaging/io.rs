use std::path::Path;

use image::{GrayImage, ImageFormat, RgbImage};

use super::{BinaryMask, Frame, ImagingError, ProbabilityMap};

fn io_err(path: &Path, source: image::ImageError) -> ImagingError {
    ImagingError::Image {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a PNG or JPEG file as RGB.
pub fn load_frame(path: &Path) -> Result<Frame, ImagingError> {
    let img = image::open(path).map_err(|e| io_err(path, e))?.into_rgb8();
    let (w, h) = img.dimensions();
    Frame::new(w, h, img.into_raw())
}

fn load_gray(path: &Path) -> Result<GrayImage, ImagingError> {
    Ok(image::open(path).map_err(|e| io_err(path, e))?.into_luma8())
}

/// Reads a grayscale-convertible image as a binary mask (`value/255 >= 0.5`).
pub fn load_mask(path: &Path) -> Result<BinaryMask, ImagingError> {
    let g = load_gray(path)?;
    let (w, h) = g.dimensions();
    BinaryMask::new(w, h, g.into_raw().into_iter().map(|v| (v >= 128) as u8).collect())
}

/// Reads an 8-bit grayscale image as probabilities `value/255`.
pub fn load_probability_map(path: &Path) -> Result<ProbabilityMap, ImagingError> {
    let g = load_gray(path)?;
    let (w, h) = g.dimensions();
    ProbabilityMap::new(w, h, g.into_raw().into_iter().map(|v| v as f32 / 255.0).collect())
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<(), ImagingError> {
    let img = RgbImage::from_raw(frame.width(), frame.height(), frame.data().to_vec())
        .expect("frame buffer length is validated at construction");
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| io_err(path, e))
}

/// Writes a mask as an 8-bit PNG with values 0/255.
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<(), ImagingError> {
    let img = GrayImage::from_raw(
        mask.width(),
        mask.height(),
        mask.values().iter().map(|&v| v * 255).collect(),
    )
    .expect("mask buffer length is validated at construction");
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<u8> = (0..5 * 3 * 3).map(|i| (i * 17) as u8).collect();
        let f = Frame::new(5, 3, data).unwrap();
        let p = dir.path().join("f.png");
        save_frame(&f, &p).unwrap();
        assert_eq!(load_frame(&p).unwrap(), f);

        let m = BinaryMask::from_fn(4, 4, |x, y| x == y);
        let mp = dir.path().join("m.png");
        save_mask(&m, &mp).unwrap();
        assert_eq!(load_mask(&mp).unwrap(), m);
        let pm = load_probability_map(&mp).unwrap();
        assert_eq!(pm.get(2, 2), 1.0);
        assert_eq!(pm.get(1, 2), 0.0);
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_frame(Path::new("/nonexistent/x.png")).unwrap_err().to_string();
        assert!(err.contains("/nonexistent/x.png"));
    }
}
