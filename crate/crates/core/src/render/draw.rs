use font8x8::legacy::BASIC_LEGACY;
use serde::{Deserialize, Serialize};

use super::color::{blend_pixel, RenderStyle};
use crate::imaging::{Frame, PixelBox};
use crate::tracking::SizeClass;

pub const GLYPH: u32 = 8;

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`, always inside the frame
/// it was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Rect {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    fn clipped(x0: i64, y0: i64, x1: i64, y1: i64, w: u32, h: u32) -> Rect {
        let cx = |v: i64| v.clamp(0, w as i64) as u32;
        let cy = |v: i64| v.clamp(0, h as i64) as u32;
        Rect {
            x0: cx(x0),
            y0: cy(y0),
            x1: cx(x1),
            y1: cy(y1),
        }
    }
}

fn fill(frame: &mut Frame, r: Rect, rgb: [u8; 3], alpha: u8) {
    for y in r.y0..r.y1 {
        for x in r.x0..r.x1 {
            if alpha == 255 {
                frame.set_pixel(x, y, rgb);
            } else {
                blend_pixel(frame, x, y, rgb, alpha);
            }
        }
    }
}

/// Pixel extent of `text` at the given origin, clipped to the frame.
pub fn text_rect(text: &str, x: i64, y: i64, frame_w: u32, frame_h: u32) -> Rect {
    let w = text.chars().count() as i64 * GLYPH as i64;
    Rect::clipped(x, y, x + w, y + GLYPH as i64, frame_w, frame_h)
}

/// Draws ASCII text in the 8x8 bitmap font. Non-ASCII characters render as
/// `?`. Pixels outside the frame are skipped.
pub fn draw_text(frame: &mut Frame, text: &str, x: i64, y: i64, rgb: [u8; 3]) {
    let (w, h) = frame.dims();
    for (i, ch) in text.chars().enumerate() {
        let code = if ch.is_ascii() { ch as usize } else { '?' as usize };
        let glyph = BASIC_LEGACY[code];
        let gx = x + i as i64 * GLYPH as i64;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..GLYPH as i64 {
                if bits >> col & 1 == 0 {
                    continue;
                }
                let (px, py) = (gx + col, y + row as i64);
                if px >= 0 && py >= 0 && (px as u32) < w && (py as u32) < h {
                    frame.set_pixel(px as u32, py as u32, rgb);
                }
            }
        }
    }
}

/// Label text for a detection box.
pub fn box_label(id: u64, confidence: f64) -> String {
    format!("#{id} {confidence:.2}")
}

/// One box to be drawn: frame-space corners, confidence and track id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxOverlay {
    pub r#box: PixelBox,
    pub confidence: f64,
    pub id: u64,
}

/// Outline rectangle of a box after clamping to the frame, in pixels.
pub fn box_rect(b: &PixelBox, frame_w: u32, frame_h: u32) -> Rect {
    Rect::clipped(
        b.xmin.floor() as i64,
        b.ymin.floor() as i64,
        b.xmax.ceil() as i64,
        b.ymax.ceil() as i64,
        frame_w,
        frame_h,
    )
}

/// Where the label for a box goes: just above the outline, or inside its
/// top edge when there is no room above.
pub fn label_rect(o: &BoxOverlay, frame_w: u32, frame_h: u32) -> Rect {
    let (x, y) = label_origin(o, frame_w, frame_h);
    let text = box_label(o.id, o.confidence);
    let r = text_rect(&text, x, y, frame_w, frame_h);
    // one pixel of padding on each side for the background
    Rect::clipped(
        r.x0 as i64 - 1,
        r.y0 as i64 - 1,
        r.x1 as i64 + 1,
        r.y1 as i64 + 1,
        frame_w,
        frame_h,
    )
}

fn label_origin(o: &BoxOverlay, frame_w: u32, frame_h: u32) -> (i64, i64) {
    let r = box_rect(&o.r#box, frame_w, frame_h);
    let above = r.y0 as i64 - GLYPH as i64 - 1;
    let y = if above >= 1 { above } else { r.y0 as i64 + 3 };
    (r.x0 as i64 + 1, y)
}

/// Draws the outline ring and the label. Returns the rectangles touched.
pub fn draw_box(frame: &mut Frame, o: &BoxOverlay, style: &RenderStyle) -> Vec<Rect> {
    let (w, h) = frame.dims();
    let r = box_rect(&o.r#box, w, h);
    if r.is_empty() {
        return Vec::new();
    }
    let t = style.box_thickness.max(1);
    let c = style.box_color;
    let ring = [
        Rect { y1: (r.y0 + t).min(r.y1), ..r },
        Rect { y0: r.y1.saturating_sub(t).max(r.y0), ..r },
        Rect { x1: (r.x0 + t).min(r.x1), ..r },
        Rect { x0: r.x1.saturating_sub(t).max(r.x0), ..r },
    ];
    for part in ring {
        fill(frame, part, c, 255);
    }
    let lr = label_rect(o, w, h);
    fill(frame, lr, c, 255);
    let (x, y) = label_origin(o, w, h);
    draw_text(frame, &box_label(o.id, o.confidence), x, y, [255, 255, 255]);
    vec![r, lr]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub id: u64,
    pub size_class: SizeClass,
    pub diameter: f64,
    pub margin: f64,
    /// `"mm"` when calibrated, `"px"` otherwise.
    pub unit: String,
    pub confidence: f64,
}

impl PanelRow {
    pub fn text(&self) -> String {
        format!(
            "#{} {} {:.1}+/-{:.1}{} {:.2}",
            self.id,
            self.size_class.as_str(),
            self.diameter,
            self.margin,
            self.unit,
            self.confidence
        )
    }
}

/// Measurement panel anchored at the top-left corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub fps: f64,
    pub rows: Vec<PanelRow>,
}

impl PanelSpec {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!("FPS {:.1}", self.fps)];
        out.extend(self.rows.iter().map(PanelRow::text));
        out
    }
}

const PANEL_PAD: u32 = 4;
const LINE_H: u32 = GLYPH + 2;

pub fn panel_rect(panel: &PanelSpec, frame_w: u32, frame_h: u32) -> Rect {
    let lines = panel.lines();
    let cols = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0) as u32;
    Rect::clipped(
        0,
        0,
        (cols * GLYPH + 2 * PANEL_PAD) as i64,
        (lines.len() as u32 * LINE_H + 2 * PANEL_PAD) as i64,
        frame_w,
        frame_h,
    )
}

/// Dimmed backdrop plus one text line per entry. Returns the area touched.
pub fn draw_panel(frame: &mut Frame, panel: &PanelSpec) -> Rect {
    let (w, h) = frame.dims();
    let r = panel_rect(panel, w, h);
    fill(frame, r, [0, 0, 0], 160);
    for (i, line) in panel.lines().iter().enumerate() {
        let y = (PANEL_PAD + i as u32 * LINE_H) as i64;
        draw_text(frame, line, PANEL_PAD as i64, y, [255, 255, 255]);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overlay(b: PixelBox, confidence: f64) -> BoxOverlay {
        BoxOverlay { r#box: b, confidence, id: 1 }
    }

    #[test]
    fn label_format() {
        assert_eq!(box_label(1, 0.873), "#1 0.87");
        assert_eq!(box_label(12, 1.0), "#12 1.00");
    }

    #[test]
    fn full_frame_box_draws_ring() {
        let mut f = Frame::filled(40, 30, [10, 20, 30]);
        let b = PixelBox::new(0.0, 0.0, 40.0, 30.0).unwrap();
        draw_box(&mut f, &overlay(b, 0.5), &RenderStyle::default());
        for (x, y) in [(0, 29), (39, 29), (39, 15), (1, 28), (38, 1)] {
            assert_eq!(f.pixel(x, y), [0, 0, 255], "({x},{y})");
        }
        assert_eq!(f.pixel(20, 20), [10, 20, 30]);
        assert_eq!(f.pixel(2, 20), [10, 20, 30]);
    }

    #[test]
    fn text_stays_in_rect() {
        let mut f = Frame::filled(64, 16, [0, 0, 0]);
        draw_text(&mut f, "#1 0.87", 2, 3, [255, 255, 255]);
        let r = text_rect("#1 0.87", 2, 3, 64, 16);
        let mut lit = 0;
        for y in 0..16 {
            for x in 0..64 {
                if f.pixel(x, y) != [0, 0, 0] {
                    assert!(r.contains(x, y));
                    lit += 1;
                }
            }
        }
        assert!(lit > 20);
    }

    #[test]
    fn panel_lines() {
        let p = PanelSpec {
            fps: 35.04,
            rows: vec![PanelRow {
                id: 3,
                size_class: SizeClass::Small,
                diameter: 7.24,
                margin: 0.31,
                unit: "mm".into(),
                confidence: 0.912,
            }],
        };
        assert_eq!(p.lines(), vec!["FPS 35.0", "#3 small 7.2+/-0.3mm 0.91"]);
        let r = panel_rect(&p, 640, 480);
        assert_eq!((r.x0, r.y0), (0, 0));
    }
}
