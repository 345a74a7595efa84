use std::collections::VecDeque;

use thiserror::Error;

pub const DEFAULT_FPS_WINDOW: usize = 30;

#[derive(Debug, Error, PartialEq)]
#[error("timestamp {got} does not follow previous tick {prev}")]
pub struct NonMonotonicTick {
    pub prev: f64,
    pub got: f64,
}

/// Sliding-window frame rate over tick timestamps in seconds.
#[derive(Debug, Clone)]
pub struct FpsMeter {
    window: usize,
    ticks: VecDeque<f64>,
}

impl Default for FpsMeter {
    fn default() -> Self {
        Self::new(DEFAULT_FPS_WINDOW)
    }
}

impl FpsMeter {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(2),
            ticks: VecDeque::new(),
        }
    }

    /// Records a tick; timestamps must be strictly increasing.
    pub fn tick(&mut self, t: f64) -> Result<f64, NonMonotonicTick> {
        if let Some(&prev) = self.ticks.back() {
            if !(t > prev) {
                return Err(NonMonotonicTick { prev, got: t });
            }
        }
        self.ticks.push_back(t);
        while self.ticks.len() > self.window {
            self.ticks.pop_front();
        }
        Ok(self.fps())
    }

    /// `(n - 1) / (t_last - t_first)` over the window; 0 with fewer than two ticks.
    pub fn fps(&self) -> f64 {
        match (self.ticks.front(), self.ticks.back()) {
            (Some(&a), Some(&b)) if self.ticks.len() >= 2 => (self.ticks.len() - 1) as f64 / (b - a),
            _ => 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }
}

/// Frame rate over the last `window` timestamps of a full tick sequence.
pub fn fps_from_ticks(ticks: &[f64], window: usize) -> Result<f64, NonMonotonicTick> {
    let mut m = FpsMeter::new(window);
    let mut fps = 0.0;
    for &t in ticks {
        fps = m.tick(t)?;
    }
    Ok(fps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let ticks: Vec<f64> = (0..100).map(|i| i as f64 / 35.0).collect();
        assert!((fps_from_ticks(&ticks, 30).unwrap() - 35.0).abs() < 0.01);
        let ticks: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        assert!((fps_from_ticks(&ticks, 30).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(fps_from_ticks(&[3.0], 30).unwrap(), 0.0);
        assert_eq!(fps_from_ticks(&[], 30).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_monotone() {
        assert_eq!(
            fps_from_ticks(&[1.0, 2.0, 2.0], 30),
            Err(NonMonotonicTick { prev: 2.0, got: 2.0 })
        );
        assert!(fps_from_ticks(&[1.0, 0.5], 30).is_err());
    }

    #[test]
    fn window_forgets_old_ticks() {
        let mut m = FpsMeter::new(30);
        for i in 0..30 {
            m.tick(i as f64).unwrap();
        }
        for i in 0..30 {
            m.tick(30.0 + i as f64 * 0.5).unwrap();
        }
        assert_eq!(m.len(), 30);
        assert!((m.fps() - 2.0).abs() < 1e-12);
    }
}
