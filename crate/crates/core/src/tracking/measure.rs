use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::imaging::BinaryMask;

pub const DEFAULT_EMA_ALPHA: f64 = 0.3;
pub const DEFAULT_MARGIN_WINDOW: usize = 15;

/// Exponential moving average step. `prev = None` means no state yet, in
/// which case the observation initializes it.
pub fn ema_update(prev: Option<f64>, obs: f64, alpha: f64) -> f64 {
    debug_assert!(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
    match prev {
        None => obs,
        Some(p) => alpha * obs + (1.0 - alpha) * p,
    }
}

/// Size of one mask: pixel area and equivalent-circle diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawMeasurement {
    pub area_px: f64,
    pub diameter_px: f64,
}

pub fn measure(mask: &BinaryMask) -> RawMeasurement {
    let area = mask.count_ones() as f64;
    RawMeasurement {
        area_px: area,
        diameter_px: 2.0 * (area / std::f64::consts::PI).sqrt(),
    }
}

/// Sample standard deviation; 0 with fewer than two values.
pub fn sample_std(values: impl ExactSizeIterator<Item = f64> + Clone) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Smoothed size of one tracked polyp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEstimate {
    pub area_px: f64,
    pub diameter_px: f64,
    pub area_smoothed: f64,
    pub diameter_smoothed: f64,
    /// Sample std-dev of the recent raw diameters.
    pub margin_diameter: f64,
    pub window: VecDeque<f64>,
    pub observations: u64,
}

impl Default for MeasurementEstimate {
    fn default() -> Self {
        Self {
            area_px: 0.0,
            diameter_px: 0.0,
            area_smoothed: 0.0,
            diameter_smoothed: 0.0,
            margin_diameter: 0.0,
            window: VecDeque::new(),
            observations: 0,
        }
    }
}

impl MeasurementEstimate {
    pub fn observe(&mut self, raw: RawMeasurement, alpha: f64, window: usize) {
        let first = self.observations == 0;
        let prev = |v: f64| (!first).then_some(v);
        self.area_px = raw.area_px;
        self.diameter_px = raw.diameter_px;
        self.area_smoothed = ema_update(prev(self.area_smoothed), raw.area_px, alpha);
        self.diameter_smoothed = ema_update(prev(self.diameter_smoothed), raw.diameter_px, alpha);
        self.window.push_back(raw.diameter_px);
        while self.window.len() > window.max(1) {
            self.window.pop_front();
        }
        self.margin_diameter = sample_std(self.window.iter().copied());
        self.observations += 1;
    }
}
