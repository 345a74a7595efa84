use serde::{Deserialize, Serialize};

use super::measure::{MeasurementEstimate, RawMeasurement, DEFAULT_EMA_ALPHA, DEFAULT_MARGIN_WINDOW};
use crate::imaging::PixelBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub iou_min: f64,
    /// A track is retired once it has been missed for more than this many
    /// consecutive frames.
    pub retire_after: u32,
    pub ema_alpha: f64,
    pub margin_window: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            iou_min: 0.3,
            retire_after: 10,
            ema_alpha: DEFAULT_EMA_ALPHA,
            margin_window: DEFAULT_MARGIN_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    pub r#box: PixelBox,
    pub age: u64,
    pub missed: u32,
    pub measurement: MeasurementEstimate,
    pub last_confidence: f64,
}

/// One detection offered to the tracker for the current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub r#box: PixelBox,
    pub confidence: f64,
    /// Size from the segmentation mask; `None` when no mask was produced.
    pub measurement: Option<RawMeasurement>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// `(track index, detection index)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_dets: Vec<usize>,
}

/// Greedy IoU association. Candidate pairs with IoU at least `iou_min` are
/// taken in order of decreasing IoU (ties: lower track id, then detection
/// order) while both sides are still free.
pub fn associate(tracks: &[Track], dets: &[(PixelBox, f64)], iou_min: f64) -> Assignment {
    let mut pairs: Vec<(f64, u64, usize, usize)> = Vec::new();
    for (ti, t) in tracks.iter().enumerate() {
        for (di, (b, _)) in dets.iter().enumerate() {
            let iou = t.r#box.iou(b);
            if iou >= iou_min {
                pairs.push((iou, t.id, ti, di));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
    let mut track_used = vec![false; tracks.len()];
    let mut det_used = vec![false; dets.len()];
    let mut matches = Vec::new();
    for (_, _, ti, di) in pairs {
        if !track_used[ti] && !det_used[di] {
            track_used[ti] = true;
            det_used[di] = true;
            matches.push((ti, di));
        }
    }
    Assignment {
        matches,
        unmatched_tracks: (0..tracks.len()).filter(|&i| !track_used[i]).collect(),
        unmatched_dets: (0..dets.len()).filter(|&i| !det_used[i]).collect(),
    }
}

/// Single-stream tracker state.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Self {
        Self {
            config,
            tracks: Vec::new(),
            next_id: 1,
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live tracks in id order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Associates this frame's observations and applies the lifecycle rules.
    /// Returns the track id each observation ended up on.
    pub fn step(&mut self, obs: &[Observation]) -> Vec<u64> {
        let dets: Vec<(PixelBox, f64)> = obs.iter().map(|o| (o.r#box, o.confidence)).collect();
        let assignment = associate(&self.tracks, &dets, self.config.iou_min);
        self.apply(&assignment, obs)
    }

    /// Matched tracks take the detection's box and measurement; unmatched
    /// tracks age a miss and are retired past the limit; unmatched detections
    /// open new tracks with fresh ids.
    pub fn apply(&mut self, assignment: &Assignment, obs: &[Observation]) -> Vec<u64> {
        let cfg = self.config;
        let mut ids = vec![0; obs.len()];
        for &(ti, di) in &assignment.matches {
            let t = &mut self.tracks[ti];
            ids[di] = t.id;
            let o = &obs[di];
            t.r#box = o.r#box;
            t.last_confidence = o.confidence;
            t.missed = 0;
            t.age += 1;
            if let Some(m) = o.measurement {
                t.measurement.observe(m, cfg.ema_alpha, cfg.margin_window);
            }
        }
        for &ti in &assignment.unmatched_tracks {
            let t = &mut self.tracks[ti];
            t.missed += 1;
            t.age += 1;
        }
        self.tracks.retain(|t| t.missed <= cfg.retire_after);
        for &di in &assignment.unmatched_dets {
            let o = &obs[di];
            let mut measurement = MeasurementEstimate::default();
            if let Some(m) = o.measurement {
                measurement.observe(m, cfg.ema_alpha, cfg.margin_window);
            }
            self.tracks.push(Track {
                id: self.next_id,
                r#box: o.r#box,
                age: 1,
                missed: 0,
                measurement,
                last_confidence: o.confidence,
            });
            ids[di] = self.next_id;
            self.next_id += 1;
        }
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Pcg32;

    fn pb(x0: f64, y0: f64, x1: f64, y1: f64) -> PixelBox {
        PixelBox::new(x0, y0, x1, y1).unwrap()
    }

    fn obs(b: PixelBox) -> Observation {
        Observation {
            r#box: b,
            confidence: 0.9,
            measurement: None,
        }
    }

    fn track(id: u64, b: PixelBox) -> Track {
        Track {
            id,
            r#box: b,
            age: 1,
            missed: 0,
            measurement: MeasurementEstimate::default(),
            last_confidence: 0.9,
        }
    }

    #[test]
    fn match_and_spawn() {
        let t = vec![track(1, pb(0.0, 0.0, 10.0, 10.0))];
        let a = associate(&t, &[(pb(0.0, 0.0, 10.0, 12.5), 0.9)], 0.3);
        assert_eq!(a.matches, vec![(0, 0)]);

        // inter 20, union 100
        let shifted = pb(0.0, 0.0, 10.0, 2.0);
        let iou = t[0].r#box.iou(&shifted);
        assert!((iou - 0.2).abs() < 1e-9, "{iou}");
        let a = associate(&t, &[(shifted, 0.9)], 0.3);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_dets, vec![0]);

        let mut tr = Tracker::new(TrackerConfig::default());
        assert_eq!(tr.step(&[obs(pb(0.0, 0.0, 10.0, 10.0))]), vec![1]);
        assert_eq!(tr.step(&[obs(shifted)]), vec![2]);
        assert_eq!(tr.tracks().iter().map(|t| t.id).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn stationary_detection_keeps_one_id() {
        let mut tr = Tracker::new(TrackerConfig::default());
        for _ in 0..100 {
            tr.step(&[obs(pb(50.0, 50.0, 90.0, 80.0))]);
            assert_eq!(tr.tracks().len(), 1);
            assert_eq!(tr.tracks()[0].id, 1);
        }
        assert_eq!(tr.tracks()[0].age, 100);
    }

    #[test]
    fn retirement_after_eleven_misses_and_no_reuse() {
        let mut tr = Tracker::new(TrackerConfig::default());
        let b = pb(50.0, 50.0, 90.0, 80.0);
        tr.step(&[obs(b)]);
        for i in 1..=11 {
            tr.step(&[]);
            assert_eq!(tr.tracks().len(), usize::from(i <= 10), "after {i} misses");
        }
        tr.step(&[obs(b)]);
        assert_eq!(tr.tracks()[0].id, 2);
    }

    #[test]
    fn tie_prefers_lower_track_id() {
        let b = pb(0.0, 0.0, 10.0, 10.0);
        let t = vec![track(7, b), track(3, b)];
        let a = associate(&t, &[(b, 0.9)], 0.3);
        assert_eq!(a.matches, vec![(1, 0)]);
    }

    // Exhaustive max-weight assignment over pairs with IoU >= iou_min.
    fn brute_force_weight(w: &[Vec<f64>], iou_min: f64) -> f64 {
        fn rec(w: &[Vec<f64>], row: usize, used: &mut Vec<bool>, iou_min: f64) -> f64 {
            if row == w.len() {
                return 0.0;
            }
            let mut best = rec(w, row + 1, used, iou_min);
            for j in 0..used.len() {
                if !used[j] && w[row][j] >= iou_min {
                    used[j] = true;
                    best = best.max(w[row][j] + rec(w, row + 1, used, iou_min));
                    used[j] = false;
                }
            }
            best
        }
        let cols = w.first().map_or(0, Vec::len);
        rec(w, 0, &mut vec![false; cols], iou_min)
    }

    #[test]
    fn greedy_vs_exhaustive_assignment() {
        let mut rng = Pcg32::new(11);
        let mut unit = || rng.next_u32() as f64 / u32::MAX as f64;
        for _ in 0..2000 {
            let nt = 1 + (unit() * 3.0) as usize % 3;
            let nd = 1 + (unit() * 3.0) as usize % 3;
            // well-separated objects with small per-frame jitter
            let tracks: Vec<Track> = (0..nt)
                .map(|i| {
                    let x = 100.0 * i as f64 + 10.0 * unit();
                    track(i as u64 + 1, pb(x, 10.0, x + 40.0, 50.0))
                })
                .collect();
            let dets: Vec<(PixelBox, f64)> = (0..nd)
                .map(|j| {
                    let x = 100.0 * j as f64 + 10.0 * unit();
                    (pb(x, 10.0 + 5.0 * unit(), x + 40.0, 50.0), 0.9)
                })
                .collect();
            let w: Vec<Vec<f64>> = tracks
                .iter()
                .map(|t| dets.iter().map(|d| t.r#box.iou(&d.0)).collect())
                .collect();
            let a = associate(&tracks, &dets, 0.3);
            let greedy: f64 = a.matches.iter().map(|&(i, j)| w[i][j]).sum();
            let best = brute_force_weight(&w, 0.3);
            assert!((greedy - best).abs() < 1e-9, "greedy {greedy} vs optimum {best}");
        }
    }

    #[test]
    fn greedy_is_half_approximation_in_general() {
        let mut rng = Pcg32::new(5);
        let mut unit = || rng.next_u32() as f64 / u32::MAX as f64;
        for _ in 0..2000 {
            let mk = |u: &mut dyn FnMut() -> f64| {
                let (x, y) = (u() * 60.0, u() * 60.0);
                pb(x, y, x + 20.0 + u() * 20.0, y + 20.0 + u() * 20.0)
            };
            let tracks: Vec<Track> = (0..3).map(|i| track(i + 1, mk(&mut unit))).collect();
            let dets: Vec<(PixelBox, f64)> = (0..3).map(|_| (mk(&mut unit), 0.9)).collect();
            let w: Vec<Vec<f64>> = tracks
                .iter()
                .map(|t| dets.iter().map(|d| t.r#box.iou(&d.0)).collect())
                .collect();
            let a = associate(&tracks, &dets, 0.3);
            let greedy: f64 = a.matches.iter().map(|&(i, j)| w[i][j]).sum();
            let best = brute_force_weight(&w, 0.3);
            assert!(greedy <= best + 1e-9 && greedy >= best / 2.0 - 1e-9);
            let mut used_d: Vec<usize> = a.matches.iter().map(|m| m.1).collect();
            used_d.dedup();
            assert_eq!(used_d.len(), a.matches.len());
        }
    }
}
