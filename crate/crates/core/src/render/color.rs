use serde::{Deserialize, Serialize};

use super::RenderError;
use crate::imaging::{Frame, ProbabilityMap};

pub const DEFAULT_MAX_OPACITY: f64 = 0.6;

/// RGBA layer with straight (non-premultiplied) alpha.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heatmap {
    width: u32,
    height: u32,
    rgba: Vec<u8>,
}

impl Heatmap {
    pub fn transparent(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            rgba: vec![0; width as usize * height as usize * 4],
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn rgba(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        [self.rgba[i], self.rgba[i + 1], self.rgba[i + 2], self.rgba[i + 3]]
    }

    pub fn data(&self) -> &[u8] {
        &self.rgba
    }
}

fn lerp_u8(a: u8, b: u8, t: f64) -> u8 {
    (a as f64 + (b as f64 - a as f64) * t).round().clamp(0.0, 255.0) as u8
}

/// Blue at 0, yellow at 0.5, red at 1, linear in between.
pub fn colormap(p: f64) -> [u8; 3] {
    const BLUE: [u8; 3] = [0, 0, 255];
    const YELLOW: [u8; 3] = [255, 255, 0];
    const RED: [u8; 3] = [255, 0, 0];
    let p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
    let (a, b, t) = if p <= 0.5 {
        (BLUE, YELLOW, p / 0.5)
    } else {
        (YELLOW, RED, (p - 0.5) / 0.5)
    };
    [lerp_u8(a[0], b[0], t), lerp_u8(a[1], b[1], t), lerp_u8(a[2], b[2], t)]
}

/// `round(max_opacity * 255 * p)` with halves rounded up. The peak alpha is
/// rounded to an integer first so that 0.6 gives exactly 153.
pub fn heat_alpha(p: f64, max_opacity: f64) -> u8 {
    let peak = (max_opacity.clamp(0.0, 1.0) * 255.0).round();
    (peak * p.clamp(0.0, 1.0) + 0.5).floor() as u8
}

pub fn heatmap_from_prob(p: &ProbabilityMap, max_opacity: f64) -> Heatmap {
    let (w, h) = p.dims();
    let mut rgba = Vec::with_capacity(p.values().len() * 4);
    for &v in p.values() {
        let v = v as f64;
        let a = heat_alpha(v, max_opacity);
        if a == 0 {
            rgba.extend_from_slice(&[0, 0, 0, 0]);
        } else {
            let [r, g, b] = colormap(v);
            rgba.extend_from_slice(&[r, g, b, a]);
        }
    }
    Heatmap {
        width: w,
        height: h,
        rgba,
    }
}

/// Integer alpha blend of one channel, rounded to nearest.
pub fn blend_channel(src: u8, dst: u8, alpha: u8) -> u8 {
    let (s, d, a) = (src as u32, dst as u32, alpha as u32);
    ((s * a + d * (255 - a) + 127) / 255) as u8
}

pub fn blend_pixel(frame: &mut Frame, x: u32, y: u32, rgb: [u8; 3], alpha: u8) {
    if alpha == 0 {
        return;
    }
    let d = frame.pixel(x, y);
    frame.set_pixel(
        x,
        y,
        [
            blend_channel(rgb[0], d[0], alpha),
            blend_channel(rgb[1], d[1], alpha),
            blend_channel(rgb[2], d[2], alpha),
        ],
    );
}

pub fn apply_heatmap(frame: &mut Frame, heat: &Heatmap) -> Result<(), RenderError> {
    if frame.dims() != heat.dims() {
        return Err(RenderError::DimensionMismatch {
            frame: frame.dims(),
            layer: heat.dims(),
        });
    }
    for y in 0..heat.height {
        for x in 0..heat.width {
            let [r, g, b, a] = heat.rgba(x, y);
            blend_pixel(frame, x, y, [r, g, b], a);
        }
    }
    Ok(())
}

/// Overlay styling, serialized as part of the pipeline config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    pub max_opacity: f64,
    pub box_color: [u8; 3],
    pub box_thickness: u32,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            max_opacity: DEFAULT_MAX_OPACITY,
            box_color: [0, 0, 255],
            box_thickness: 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_stops() {
        assert_eq!(colormap(0.0), [0, 0, 255]);
        assert_eq!(colormap(0.5), [255, 255, 0]);
        assert_eq!(colormap(1.0), [255, 0, 0]);
        assert_eq!(colormap(0.25), [128, 128, 128]);
    }

    #[test]
    fn alpha_rule() {
        assert_eq!(heat_alpha(1.0, 0.6), 153);
        assert_eq!(heat_alpha(0.5, 0.6), 77);
        assert_eq!(heat_alpha(0.0, 0.6), 0);
        for i in 0..=1000 {
            let p = i as f64 / 1000.0;
            let exact = 153.0 * p;
            let a = heat_alpha(p, 0.6) as f64;
            assert!(a - exact <= 0.5 + 1e-9 && exact - a < 0.5 + 1e-9);
        }
    }

    #[test]
    fn heatmap_layers() {
        let zero = heatmap_from_prob(&ProbabilityMap::zeros(4, 3), 0.6);
        assert!(zero.data().iter().all(|&v| v == 0));
        let mut p = ProbabilityMap::zeros(2, 1);
        p.set(0, 0, 1.0);
        p.set(1, 0, 0.5);
        let h = heatmap_from_prob(&p, 0.6);
        assert_eq!(h.rgba(0, 0), [255, 0, 0, 153]);
        assert_eq!(h.rgba(1, 0), [255, 255, 0, 77]);
    }

    #[test]
    fn blend_over_black() {
        let mut f = Frame::filled(1, 1, [0, 0, 0]);
        let mut p = ProbabilityMap::zeros(1, 1);
        p.set(0, 0, 1.0);
        apply_heatmap(&mut f, &heatmap_from_prob(&p, 0.6)).unwrap();
        assert_eq!(f.pixel(0, 0), [153, 0, 0]);
        assert_eq!(blend_channel(200, 10, 255), 200);
        assert_eq!(blend_channel(200, 10, 0), 10);
    }

    #[test]
    fn hue_position_is_monotone() {
        // position along blue -> yellow -> red: g rises then falls while r,b
        // move one way only
        let mut prev = colormap(0.0);
        for i in 1..=1000 {
            let c = colormap(i as f64 / 1000.0);
            assert!(c[0] >= prev[0] && c[2] <= prev[2]);
            if i <= 500 {
                assert!(c[1] >= prev[1]);
            } else {
                assert!(c[1] <= prev[1]);
            }
            prev = c;
        }
    }
}
