use serde::{Deserialize, Serialize};

use super::ImagingError;

const EDGE_TOL: f64 = 1e-6;

/// Axis-aligned box in pixels, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl PixelBox {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self, ImagingError> {
        let all = [xmin, ymin, xmax, ymax];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ImagingError::InvalidBox(format!(
                "non-finite coordinate in ({xmin}, {ymin}, {xmax}, {ymax})"
            )));
        }
        if xmin < 0.0 || ymin < 0.0 {
            return Err(ImagingError::InvalidBox(format!(
                "negative coordinate in ({xmin}, {ymin}, {xmax}, {ymax})"
            )));
        }
        if xmin >= xmax || ymin >= ymax {
            return Err(ImagingError::InvalidBox(format!(
                "degenerate box ({xmin}, {ymin}, {xmax}, {ymax})"
            )));
        }
        Ok(Self {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    /// Builds a box without validation. Used for intermediate geometry where
    /// clamping may legitimately produce zero-area results.
    pub fn from_corners_unchecked(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.xmax <= self.xmin || self.ymax <= self.ymin
    }

    pub fn iou(&self, other: &PixelBox) -> f64 {
        corner_iou(
            [self.xmin, self.ymin, self.xmax, self.ymax],
            [other.xmin, other.ymin, other.xmax, other.ymax],
        )
    }

    /// Grows each side by `frac` of the box extent, then clamps to `[0,w] x [0,h]`.
    pub fn expand(&self, frac: f64, w: u32, h: u32) -> PixelBox {
        let dx = self.width() * frac;
        let dy = self.height() * frac;
        PixelBox {
            xmin: (self.xmin - dx).clamp(0.0, w as f64),
            ymin: (self.ymin - dy).clamp(0.0, h as f64),
            xmax: (self.xmax + dx).clamp(0.0, w as f64),
            ymax: (self.ymax + dy).clamp(0.0, h as f64),
        }
    }

    /// Integer pixel span `(x0, y0, w, h)` covering the box, clamped to the image.
    pub fn pixel_span(&self, img_w: u32, img_h: u32) -> Option<(u32, u32, u32, u32)> {
        let x0 = self.xmin.floor().clamp(0.0, img_w as f64) as u32;
        let y0 = self.ymin.floor().clamp(0.0, img_h as f64) as u32;
        let x1 = self.xmax.ceil().clamp(0.0, img_w as f64) as u32;
        let y1 = self.ymax.ceil().clamp(0.0, img_h as f64) as u32;
        (x1 > x0 && y1 > y0).then(|| (x0, y0, x1 - x0, y1 - y0))
    }
}

/// YOLO-style box: center and size as fractions of the image dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBox {
    pub xc: f64,
    pub yc: f64,
    pub w: f64,
    pub h: f64,
}

impl NormalizedBox {
    pub fn new(xc: f64, yc: f64, w: f64, h: f64) -> Result<Self, ImagingError> {
        let b = Self { xc, yc, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), ImagingError> {
        let Self { xc, yc, w, h } = *self;
        for (name, v) in [("xc", xc), ("yc", yc), ("w", w), ("h", h)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ImagingError::InvalidBox(format!("{name}={v} outside [0,1]")));
            }
        }
        if xc - w / 2.0 < -EDGE_TOL
            || xc + w / 2.0 > 1.0 + EDGE_TOL
            || yc - h / 2.0 < -EDGE_TOL
            || yc + h / 2.0 > 1.0 + EDGE_TOL
        {
            return Err(ImagingError::InvalidBox(format!(
                "box ({xc}, {yc}, {w}, {h}) extends past the image edge"
            )));
        }
        Ok(())
    }

    /// Builds the box from corner fractions, clipping to the unit square.
    /// Returns `None` when nothing remains after clipping.
    pub fn from_corners_clipped(x0: f64, y0: f64, x1: f64, y1: f64) -> Option<Self> {
        let (x0, y0) = (x0.clamp(0.0, 1.0), y0.clamp(0.0, 1.0));
        let (x1, y1) = (x1.clamp(0.0, 1.0), y1.clamp(0.0, 1.0));
        (x1 > x0 && y1 > y0).then(|| Self {
            xc: (x0 + x1) / 2.0,
            yc: (y0 + y1) / 2.0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }

    pub fn corners(&self) -> [f64; 4] {
        [
            self.xc - self.w / 2.0,
            self.yc - self.h / 2.0,
            self.xc + self.w / 2.0,
            self.yc + self.h / 2.0,
        ]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Intersection over union; 0 when disjoint.
    pub fn iou(&self, other: &NormalizedBox) -> f64 {
        corner_iou(self.corners(), other.corners())
    }
}

pub(crate) fn corner_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let area_a = (a[2] - a[0]) * (a[3] - a[1]);
    let area_b = (b[2] - b[0]) * (b[3] - b[1]);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Corner box in pixels to normalized center/size.
pub fn box_to_yolo(b: &PixelBox, img_w: u32, img_h: u32) -> Result<NormalizedBox, ImagingError> {
    let (w, h) = (img_w as f64, img_h as f64);
    for (name, value, limit) in [
        ("xmin", b.xmin, w),
        ("ymin", b.ymin, h),
        ("xmax", b.xmax, w),
        ("ymax", b.ymax, h),
    ] {
        if !(0.0..=limit).contains(&value) {
            return Err(ImagingError::BoxOutOfBounds {
                name,
                value,
                img_w,
                img_h,
            });
        }
    }
    if b.is_degenerate() {
        return Err(ImagingError::InvalidBox(format!(
            "degenerate box ({}, {}, {}, {})",
            b.xmin, b.ymin, b.xmax, b.ymax
        )));
    }
    Ok(NormalizedBox {
        xc: (b.xmin + b.xmax) / (2.0 * w),
        yc: (b.ymin + b.ymax) / (2.0 * h),
        w: (b.xmax - b.xmin) / w,
        h: (b.ymax - b.ymin) / h,
    })
}

pub fn yolo_to_box(n: &NormalizedBox, img_w: u32, img_h: u32) -> Result<PixelBox, ImagingError> {
    if n.w <= 0.0 || n.h <= 0.0 {
        return Err(ImagingError::DegenerateBox { w: n.w, h: n.h });
    }
    n.validate()?;
    let (w, h) = (img_w as f64, img_h as f64);
    Ok(PixelBox::from_corners_unchecked(
        ((n.xc - n.w / 2.0) * w).max(0.0),
        ((n.yc - n.h / 2.0) * h).max(0.0),
        ((n.xc + n.w / 2.0) * w).min(w),
        ((n.yc + n.h / 2.0) * h).min(h),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn full_image_box() {
        let b = PixelBox::new(0.0, 0.0, 640.0, 480.0).unwrap();
        let n = box_to_yolo(&b, 640, 480).unwrap();
        assert_eq!((n.xc, n.yc, n.w, n.h), (0.5, 0.5, 1.0, 1.0));
        let back = yolo_to_box(&NormalizedBox::new(0.5, 0.5, 1.0, 1.0).unwrap(), 416, 416).unwrap();
        assert_eq!(back, PixelBox::new(0.0, 0.0, 416.0, 416.0).unwrap());
    }

    #[test]
    fn hand_computed_box() {
        let b = PixelBox::new(10.0, 20.0, 50.0, 60.0).unwrap();
        let n = box_to_yolo(&b, 100, 100).unwrap();
        assert_abs_diff_eq!(n.xc, 0.30, epsilon = 1e-12);
        assert_abs_diff_eq!(n.yc, 0.40, epsilon = 1e-12);
        assert_abs_diff_eq!(n.w, 0.40, epsilon = 1e-12);
        assert_abs_diff_eq!(n.h, 0.40, epsilon = 1e-12);
        let back = yolo_to_box(&NormalizedBox::new(0.3, 0.4, 0.4, 0.4).unwrap(), 100, 100).unwrap();
        assert_abs_diff_eq!(back.xmin, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(back.ymin, 20.0, epsilon = 1e-9);
        assert_abs_diff_eq!(back.xmax, 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(back.ymax, 60.0, epsilon = 1e-9);
    }

    #[test]
    fn out_of_bounds_names_coordinate() {
        let b = PixelBox::new(10.0, 20.0, 150.0, 60.0).unwrap();
        let err = box_to_yolo(&b, 100, 100).unwrap_err().to_string();
        assert!(err.contains("xmax=150"), "{err}");
    }

    #[test]
    fn degenerate_normalized_box_rejected() {
        let n = NormalizedBox {
            xc: 0.5,
            yc: 0.5,
            w: 0.0,
            h: 0.2,
        };
        assert!(matches!(
            yolo_to_box(&n, 10, 10),
            Err(ImagingError::DegenerateBox { .. })
        ));
    }

    #[test]
    fn pixel_box_invariants() {
        assert!(PixelBox::new(5.0, 5.0, 5.0, 9.0).is_err());
        assert!(PixelBox::new(-1.0, 0.0, 5.0, 9.0).is_err());
    }

    #[test]
    fn iou_basic_cases() {
        let a = PixelBox::new(0.0, 0.0, 2.0, 2.0).unwrap();
        let b = PixelBox::new(1.0, 1.0, 3.0, 3.0).unwrap();
        let c = PixelBox::new(5.0, 5.0, 6.0, 6.0).unwrap();
        assert_abs_diff_eq!(a.iou(&b), 1.0 / 7.0, epsilon = 1e-12);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&c), 0.0);
    }

    proptest! {
        #[test]
        fn yolo_round_trip(
            w in 1u32..4000, h in 1u32..4000,
            fx0 in 0.0f64..1.0, fx1 in 0.0f64..1.0, fy0 in 0.0f64..1.0, fy1 in 0.0f64..1.0,
        ) {
            let (x0, x1) = (fx0.min(fx1) * w as f64, fx0.max(fx1) * w as f64);
            let (y0, y1) = (fy0.min(fy1) * h as f64, fy0.max(fy1) * h as f64);
            prop_assume!(x1 > x0 && y1 > y0);
            let b = PixelBox::new(x0, y0, x1, y1).unwrap();
            let n = box_to_yolo(&b, w, h).unwrap();
            n.validate().unwrap();
            let back = yolo_to_box(&n, w, h).unwrap();
            let scale = w.max(h) as f64;
            for (p, q) in [(b.xmin, back.xmin), (b.ymin, back.ymin), (b.xmax, back.xmax), (b.ymax, back.ymax)] {
                prop_assert!((p - q).abs() <= 1e-9 * scale.max(1.0), "{p} vs {q}");
            }
        }
    }
}
