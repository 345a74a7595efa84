use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::imaging::NormalizedBox;
use crate::inference::{detection_order, Detection};

pub const DEFAULT_MATCH_IOU: f64 = 0.5;

/// Outcome for one prediction after matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub confidence: f64,
    /// Index of the matched ground truth, if the prediction is a true positive.
    pub gt: Option<usize>,
    /// Best IoU against any ground truth still unmatched at its turn.
    pub iou: f64,
}

/// Predictions in ranking order plus the ground-truth count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub outcomes: Vec<PredictionOutcome>,
    pub n_gt: usize,
}

impl MatchSet {
    pub fn tp(&self) -> usize {
        self.outcomes.iter().filter(|o| o.gt.is_some()).count()
    }

    pub fn fp(&self) -> usize {
        self.outcomes.len() - self.tp()
    }

    pub fn fn_(&self) -> usize {
        self.n_gt - self.tp()
    }

    /// `TP / (TP + FP)`. With no predictions: 1.0 if there was nothing to
    /// find, else 0.0.
    pub fn precision(&self) -> f64 {
        if self.outcomes.is_empty() {
            return if self.n_gt == 0 { 1.0 } else { 0.0 };
        }
        self.tp() as f64 / self.outcomes.len() as f64
    }

    /// `TP / (TP + FN)`; 1.0 when there are no ground truths.
    pub fn recall(&self) -> f64 {
        if self.n_gt == 0 {
            1.0
        } else {
            self.tp() as f64 / self.n_gt as f64
        }
    }
}

/// Greedy matching in ranking order: each prediction takes the unmatched
/// ground truth of highest IoU (lowest index on ties) when that IoU reaches
/// `iou_min`, and is a false positive otherwise.
pub fn match_detections(preds: &[Detection], gts: &[NormalizedBox], iou_min: f64) -> MatchSet {
    let mut ranked = preds.to_vec();
    ranked.sort_by(detection_order);
    let mut taken = vec![false; gts.len()];
    let outcomes = ranked
        .iter()
        .map(|p| {
            let best = gts
                .iter()
                .enumerate()
                .filter(|(j, _)| !taken[*j])
                .map(|(j, g)| (j, p.r#box.iou(g)))
                .fold(None, |acc: Option<(usize, f64)>, (j, iou)| match acc {
                    Some((_, b)) if b >= iou => acc,
                    _ => Some((j, iou)),
                });
            match best {
                Some((j, iou)) if iou >= iou_min => {
                    taken[j] = true;
                    PredictionOutcome {
                        confidence: p.confidence,
                        gt: Some(j),
                        iou,
                    }
                }
                other => PredictionOutcome {
                    confidence: p.confidence,
                    gt: None,
                    iou: other.map_or(0.0, |(_, iou)| iou),
                },
            }
        })
        .collect();
    MatchSet {
        outcomes,
        n_gt: gts.len(),
    }
}

/// All-point interpolated average precision.
///
/// Precision/recall points are taken at every distinct confidence level
/// (tied predictions enter together), the precision curve is replaced by its
/// non-increasing envelope, and the area under it over recall is returned.
/// `None` when there are no ground truths.
pub fn average_precision(m: &MatchSet) -> Option<f64> {
    if m.n_gt == 0 {
        return None;
    }
    let mut ranked = m.outcomes.clone();
    ranked.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));

    let mut recall = vec![0.0];
    let mut precision = vec![1.0];
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < ranked.len() {
        let level = ranked[i].confidence;
        while i < ranked.len() && ranked[i].confidence.total_cmp(&level) == Ordering::Equal {
            tp += ranked[i].gt.is_some() as usize;
            seen += 1;
            i += 1;
        }
        recall.push(tp as f64 / m.n_gt as f64);
        precision.push(tp as f64 / seen as f64);
    }
    for k in (0..precision.len() - 1).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let ap = (1..recall.len())
        .map(|k| (recall[k] - recall[k - 1]) * precision[k])
        .sum::<f64>();
    Some(ap.clamp(0.0, 1.0))
}

/// Mean AP over the images that have at least one ground truth.
pub fn map_at_50(per_image: &[MatchSet]) -> Result<f64, MetricsError> {
    let aps: Vec<f64> = per_image.iter().filter_map(average_precision).collect();
    if aps.is_empty() {
        return Err(MetricsError::NoGroundTruth);
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub ap_at_50: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `(iou, confidence)` for each true positive.
    pub matched: Vec<(f64, f64)>,
}

pub fn score_detections(
    id: &str,
    preds: &[Detection],
    gts: &[NormalizedBox],
    iou_min: f64,
) -> (DetectionScores, MatchSet) {
    let m = match_detections(preds, gts, iou_min);
    let scores = DetectionScores {
        id: id.to_string(),
        precision: m.precision(),
        recall: m.recall(),
        ap_at_50: average_precision(&m),
        tp: m.tp(),
        fp: m.fp(),
        fn_: m.fn_(),
        matched: m
            .outcomes
            .iter()
            .filter(|o| o.gt.is_some())
            .map(|o| (o.iou, o.confidence))
            .collect(),
    };
    (scores, m)
}

pub fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(pairs: &[(f64, f64)]) -> Option<f64> {
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let ranked: Vec<(f64, f64)> = ranks(&xs).into_iter().zip(ranks(&ys)).collect();
    pearson(&ranked)
}
