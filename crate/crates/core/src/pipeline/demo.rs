use crate::inference::{SceneSpec, SyntheticPolyp};

/// Scene used by the `demo` command: one polyp drifting right and slightly
/// down across the frame.
pub fn demo_scene() -> SceneSpec {
    SceneSpec {
        polyps: vec![SyntheticPolyp {
            center: [0.3, 0.42],
            radii: [0.11, 0.13],
            intensity: 1.0,
            velocity: [0.003, 0.0008],
        }],
    }
}
