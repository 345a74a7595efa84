use serde::{Deserialize, Serialize};

use super::{BinaryMask, Frame, ImagingError, PixelBox};

/// How a source image is fitted into the square model canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// Detector input: aspect-preserving resize with symmetric padding.
    Letterbox,
    /// Segmenter input: aspect-preserving thumbnail pasted at the canvas center.
    ThumbnailCenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Bilinear,
    Nearest,
}

/// Mapping between a `src_w x src_h` source and a `target x target` canvas.
///
/// Both fit modes share the same geometry: the content dimensions are the
/// source dimensions times `scale`, rounded half away from zero, and the
/// content is centered with any odd leftover pixel going right/bottom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTransform {
    pub src_w: u32,
    pub src_h: u32,
    pub target: u32,
    pub scale: f64,
    pub content_w: u32,
    pub content_h: u32,
    pub pad_x: u32,
    pub pad_y: u32,
    pub mode: FitMode,
}

pub fn fit_transform(src_w: u32, src_h: u32, target: u32, mode: FitMode) -> SpaceTransform {
    assert!(
        src_w >= 1 && src_h >= 1 && target >= 1,
        "fit_transform needs positive dimensions"
    );
    let scale = (target as f64 / src_w as f64).min(target as f64 / src_h as f64);
    let fit = |side: u32| ((side as f64 * scale).round() as u32).clamp(1, target);
    let content_w = fit(src_w);
    let content_h = fit(src_h);
    SpaceTransform {
        src_w,
        src_h,
        target,
        scale,
        content_w,
        content_h,
        pad_x: (target - content_w) / 2,
        pad_y: (target - content_h) / 2,
        mode,
    }
}

impl SpaceTransform {
    pub fn is_identity(&self) -> bool {
        self.src_w == self.target
            && self.src_h == self.target
            && self.content_w == self.target
            && self.content_h == self.target
    }

    /// True when canvas pixel `(x, y)` lies inside the resampled content.
    #[inline]
    pub fn in_content(&self, x: u32, y: u32) -> bool {
        x >= self.pad_x
            && x < self.pad_x + self.content_w
            && y >= self.pad_y
            && y < self.pad_y + self.content_h
    }

    /// Continuous source coordinate of a canvas pixel center.
    #[inline]
    pub fn canvas_to_source(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.pad_x as f64) / self.scale,
            (y - self.pad_y as f64) / self.scale,
        )
    }

    /// Continuous canvas coordinate of a source point.
    #[inline]
    pub fn source_to_canvas(&self, x: f64, y: f64) -> (f64, f64) {
        (
            x * self.scale + self.pad_x as f64,
            y * self.scale + self.pad_y as f64,
        )
    }

    /// Nearest source pixel for canvas content pixel `(x, y)`.
    #[inline]
    pub fn nearest_source_pixel(&self, x: u32, y: u32) -> (u32, u32) {
        (
            nearest_index(x - self.pad_x, self.content_w, self.src_w),
            nearest_index(y - self.pad_y, self.content_h, self.src_h),
        )
    }
}

#[inline]
fn nearest_index(out: u32, out_len: u32, src_len: u32) -> u32 {
    let ratio = src_len as f64 / out_len as f64;
    (((out as f64 + 0.5) * ratio).floor() as u32).min(src_len - 1)
}

/// Bilinear sample weights for one axis: `(i0, i1, w1)`.
fn bilinear_axis(out_len: u32, src_len: u32) -> Vec<(usize, usize, f32)> {
    let ratio = src_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let s = ((o as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src_len - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src_len as usize - 1);
            (i0, i1, (s - i0 as f64) as f32)
        })
        .collect()
}

fn check_source(dims: (u32, u32), t: &SpaceTransform) -> Result<(), ImagingError> {
    if dims != (t.src_w, t.src_h) {
        return Err(ImagingError::mismatch((t.src_w, t.src_h), dims));
    }
    Ok(())
}

/// Resamples `frame` onto the `target x target` canvas with bilinear
/// interpolation, filling padding with `pad_value`.
pub fn apply_transform(
    frame: &Frame,
    t: &SpaceTransform,
    pad_value: u8,
) -> Result<Frame, ImagingError> {
    apply_transform_with(frame, t, pad_value, Interpolation::Bilinear)
}

pub fn apply_transform_with(
    frame: &Frame,
    t: &SpaceTransform,
    pad_value: u8,
    interp: Interpolation,
) -> Result<Frame, ImagingError> {
    check_source(frame.dims(), t)?;
    if t.is_identity() {
        return Ok(frame.clone());
    }
    let side = t.target as usize;
    let mut out = vec![pad_value; side * side * 3];
    let src = frame.data();
    let src_stride = t.src_w as usize * 3;

    match interp {
        Interpolation::Nearest => {
            let xs: Vec<usize> = (0..t.content_w)
                .map(|x| nearest_index(x, t.content_w, t.src_w) as usize)
                .collect();
            for cy in 0..t.content_h {
                let sy = nearest_index(cy, t.content_h, t.src_h) as usize;
                let row = ((cy + t.pad_y) as usize * side + t.pad_x as usize) * 3;
                for (cx, &sx) in xs.iter().enumerate() {
                    let s = sy * src_stride + sx * 3;
                    let d = row + cx * 3;
                    out[d..d + 3].copy_from_slice(&src[s..s + 3]);
                }
            }
        }
        Interpolation::Bilinear => {
            let xs = bilinear_axis(t.content_w, t.src_w);
            let ys = bilinear_axis(t.content_h, t.src_h);
            for (cy, &(y0, y1, wy)) in ys.iter().enumerate() {
                let row = ((cy as u32 + t.pad_y) as usize * side + t.pad_x as usize) * 3;
                let r0 = y0 * src_stride;
                let r1 = y1 * src_stride;
                for (cx, &(x0, x1, wx)) in xs.iter().enumerate() {
                    let d = row + cx * 3;
                    for c in 0..3 {
                        let p00 = src[r0 + x0 * 3 + c] as f32;
                        let p01 = src[r0 + x1 * 3 + c] as f32;
                        let p10 = src[r1 + x0 * 3 + c] as f32;
                        let p11 = src[r1 + x1 * 3 + c] as f32;
                        let top = p00 + (p01 - p00) * wx;
                        let bottom = p10 + (p11 - p10) * wx;
                        out[d + c] = (top + (bottom - top) * wy).round().clamp(0.0, 255.0) as u8;
                    }
                }
            }
        }
    }
    Frame::new(t.target, t.target, out)
}

/// Nearest-neighbor resize of a mask onto the canvas; padding is 0.
pub fn resize_mask(mask: &BinaryMask, t: &SpaceTransform) -> Result<BinaryMask, ImagingError> {
    check_source(mask.dims(), t)?;
    Ok(BinaryMask::from_fn(t.target, t.target, |x, y| {
        if !t.in_content(x, y) {
            return false;
        }
        let (sx, sy) = t.nearest_source_pixel(x, y);
        mask.get(sx, sy)
    }))
}

/// Forward-maps a source-space box onto the canvas.
pub fn map_box(b: &PixelBox, t: &SpaceTransform) -> PixelBox {
    let (x0, y0) = t.source_to_canvas(b.xmin, b.ymin);
    let (x1, y1) = t.source_to_canvas(b.xmax, b.ymax);
    PixelBox::from_corners_unchecked(x0, y0, x1, y1)
}

/// Maps a canvas-space box back to source space, clamping overhang.
///
/// A box lying entirely in padding comes back with zero width or height;
/// callers check [`PixelBox::is_degenerate`].
pub fn unmap_box(b: &PixelBox, t: &SpaceTransform) -> PixelBox {
    let (x0, y0) = t.canvas_to_source(b.xmin, b.ymin);
    let (x1, y1) = t.canvas_to_source(b.xmax, b.ymax);
    let cx = |v: f64| v.clamp(0.0, t.src_w as f64);
    let cy = |v: f64| v.clamp(0.0, t.src_h as f64);
    PixelBox::from_corners_unchecked(cx(x0), cy(y0), cx(x1), cy(y1))
}
