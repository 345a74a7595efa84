//! Demo-frame composition: probability heatmap, detection boxes, the
//! measurement panel, and PNG sequence output.

mod color;
mod draw;
mod sequence;

use thiserror::Error;

pub use color::{
    apply_heatmap, blend_channel, blend_pixel, colormap, heat_alpha, heatmap_from_prob, Heatmap,
    RenderStyle, DEFAULT_MAX_OPACITY,
};
pub use draw::{
    box_label, box_rect, draw_box, draw_panel, draw_text, label_rect, panel_rect, text_rect,
    BoxOverlay, PanelRow, PanelSpec, Rect, GLYPH,
};
pub use sequence::{encode_sequence, frame_file_name, SequenceIndex, SequenceWriter};

use crate::imaging::{Frame, ImagingError};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("layer is {}x{} but frame is {}x{}", layer.0, layer.1, frame.0, frame.1)]
    DimensionMismatch { frame: (u32, u32), layer: (u32, u32) },
    #[error("a sequence needs at least one frame")]
    EmptySequence,
    #[error("frame {got} written out of order (expected {expected})")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// A composed frame and where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedFrame {
    pub frame: Frame,
    pub frame_index: u64,
    pub stream_id: String,
}

/// Blends the heatmap, then draws boxes, then the panel. Returns the
/// composed frame and the rectangles touched by boxes and panel.
pub fn compose_with_coverage(
    frame: &Frame,
    heatmap: Option<&Heatmap>,
    boxes: &[BoxOverlay],
    panel: Option<&PanelSpec>,
    style: &RenderStyle,
) -> Result<(Frame, Vec<Rect>), RenderError> {
    let mut out = frame.clone();
    if let Some(h) = heatmap {
        apply_heatmap(&mut out, h)?;
    }
    let mut touched = Vec::new();
    for b in boxes {
        touched.extend(draw_box(&mut out, b, style));
    }
    if let Some(p) = panel {
        touched.push(draw_panel(&mut out, p));
    }
    Ok((out, touched))
}

pub fn compose(
    frame: &Frame,
    heatmap: Option<&Heatmap>,
    boxes: &[BoxOverlay],
    panel: Option<&PanelSpec>,
    style: &RenderStyle,
) -> Result<Frame, RenderError> {
    compose_with_coverage(frame, heatmap, boxes, panel, style).map(|(f, _)| f)
}
