use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::imaging::{BinaryMask, ProbabilityMap};

pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `(numerator, denominator)` of Dice before division; `(1, 1)` when both
    /// masks are empty.
    pub fn dice_ratio(&self) -> (u64, u64) {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            (1, 1)
        } else {
            (2 * self.tp, den)
        }
    }

    /// `(numerator, denominator)` of IoU before division; `(1, 1)` when both
    /// masks are empty.
    pub fn iou_ratio(&self) -> (u64, u64) {
        let den = self.tp + self.fp + self.fn_;
        if den == 0 {
            (1, 1)
        } else {
            (self.tp, den)
        }
    }

    pub fn dice(&self) -> f64 {
        let (n, d) = self.dice_ratio();
        n as f64 / d as f64
    }

    pub fn iou(&self) -> f64 {
        let (n, d) = self.iou_ratio();
        n as f64 / d as f64
    }
}

fn same_dims(a: (u32, u32), b: (u32, u32)) -> Result<(), MetricsError> {
    if a != b {
        return Err(MetricsError::DimensionMismatch { pred: a, gt: b });
    }
    Ok(())
}

pub fn confusion_counts(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts, MetricsError> {
    same_dims(pred.dims(), gt.dims())?;
    // index = 2*pred + gt -> tn, fn, fp, tp
    let mut bins = [0u64; 4];
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        bins[(2 * p + g) as usize] += 1;
    }
    Ok(ConfusionCounts {
        tn: bins[0],
        fn_: bins[1],
        fp: bins[2],
        tp: bins[3],
    })
}

/// `2|P∩G| / (|P| + |G|)`, 1.0 when both masks are empty.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64, MetricsError> {
    Ok(confusion_counts(pred, gt)?.dice())
}

/// `|P∩G| / |P∪G|`, 1.0 when both masks are empty.
pub fn jaccard(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64, MetricsError> {
    Ok(confusion_counts(pred, gt)?.iou())
}

pub fn pixel_accuracy(c: &ConfusionCounts) -> f64 {
    let total = c.total();
    if total == 0 {
        return 1.0;
    }
    (c.tp + c.tn) as f64 / total as f64
}

/// `TP / (TP + FN)`; 1.0 when the ground truth is empty.
pub fn sensitivity(c: &ConfusionCounts) -> f64 {
    let den = c.tp + c.fn_;
    if den == 0 {
        1.0
    } else {
        c.tp as f64 / den as f64
    }
}

/// `TN / (TN + FP)`; 1.0 when the ground truth has no background.
pub fn specificity(c: &ConfusionCounts) -> f64 {
    let den = c.tn + c.fp;
    if den == 0 {
        1.0
    } else {
        c.tn as f64 / den as f64
    }
}

/// Mean binary cross-entropy with predictions clamped to `[eps, 1 - eps]`.
pub fn bce(pred: &ProbabilityMap, gt: &BinaryMask, epsilon: f64) -> Result<f64, MetricsError> {
    same_dims(pred.dims(), gt.dims())?;
    let n = gt.values().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(&p, &y)| {
            let p = (p as f64).clamp(epsilon, 1.0 - epsilon);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationScores {
    pub id: String,
    pub dice: f64,
    pub iou: f64,
    pub pixel_accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub counts: ConfusionCounts,
}

pub fn score_segmentation(
    id: &str,
    pred: &BinaryMask,
    gt: &BinaryMask,
) -> Result<SegmentationScores, MetricsError> {
    let c = confusion_counts(pred, gt)?;
    Ok(SegmentationScores {
        id: id.to_string(),
        dice: c.dice(),
        iou: c.iou(),
        pixel_accuracy: pixel_accuracy(&c),
        sensitivity: sensitivity(&c),
        specificity: specificity(&c),
        counts: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: u32, h: u32, bits: &[u8]) -> BinaryMask {
        BinaryMask::new(w, h, bits.to_vec()).unwrap()
    }

    #[test]
    fn confusion_examples() {
        let ones = mask(2, 2, &[1, 1, 1, 1]);
        let zeros = mask(2, 2, &[0, 0, 0, 0]);
        assert_eq!(
            confusion_counts(&ones, &ones).unwrap(),
            ConfusionCounts { tp: 4, ..Default::default() }
        );
        assert_eq!(confusion_counts(&ones, &zeros).unwrap().fp, 4);

        let row = mask(2, 2, &[1, 1, 0, 0]);
        let col = mask(2, 2, &[1, 0, 1, 0]);
        let c = confusion_counts(&row, &col).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1, 1, 1, 1));
        assert_eq!(pixel_accuracy(&c), 0.5);
        assert_eq!(sensitivity(&c), 0.5);
        assert_eq!(specificity(&c), 0.5);

        assert!(confusion_counts(&ones, &mask(1, 4, &[1, 1, 1, 1])).is_err());
    }

    #[test]
    fn dice_and_jaccard_examples() {
        let a = mask(4, 2, &[1, 1, 1, 1, 0, 0, 0, 0]);
        let b = mask(4, 2, &[0, 0, 1, 1, 1, 1, 0, 0]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert_eq!(jaccard(&a, &b).unwrap(), 1.0 / 3.0);
        let c = mask(4, 2, &[0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(dice(&a, &c).unwrap(), 0.0);
        let empty = BinaryMask::zeros(4, 2);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(jaccard(&empty, &empty).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_conventions() {
        let c = ConfusionCounts { tp: 4, ..Default::default() };
        assert_eq!((pixel_accuracy(&c), sensitivity(&c), specificity(&c)), (1.0, 1.0, 1.0));
        let c = ConfusionCounts { tn: 3, fp: 1, ..Default::default() };
        assert_eq!(sensitivity(&c), 1.0);
    }

    #[test]
    fn bce_examples() {
        let y = BinaryMask::from_fn(3, 3, |_, _| true);
        let perfect = ProbabilityMap::new(3, 3, vec![1.0; 9]).unwrap();
        assert!(bce(&perfect, &y, BCE_EPSILON).unwrap() < 1e-6);
        let half = ProbabilityMap::new(3, 3, vec![0.5; 9]).unwrap();
        assert!((bce(&half, &y, BCE_EPSILON).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let wrong = ProbabilityMap::zeros(3, 3);
        let v = bce(&wrong, &y, BCE_EPSILON).unwrap();
        assert!(v.is_finite());
        assert!((v - -(1e-7f64).ln()).abs() < 1e-9);
    }
}
