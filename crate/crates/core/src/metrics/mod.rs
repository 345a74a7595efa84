//! Segmentation and detection metrics, clinical categories, and report
//! construction.

mod detection;
mod report;
mod segmentation;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use detection::{
    average_precision, map_at_50, match_detections, pearson, score_detections, spearman,
    DetectionScores, MatchSet, PredictionOutcome, DEFAULT_MATCH_IOU,
};
pub use report::{
    build_report, categorize, histogram_bin, table_to_csv, CategoryCounts, ClinicalCategory,
    Correlation, EvaluationReport, MetricKind, MetricSummary, ScoreRow, ScoreTable, HISTOGRAM_BINS,
};
pub use segmentation::{
    bce, confusion_counts, dice, jaccard, pixel_accuracy, score_segmentation, sensitivity,
    specificity, ConfusionCounts, SegmentationScores, BCE_EPSILON,
};

use crate::dataset::parse_yolo_line;
use crate::imaging::{load_mask, load_probability_map, threshold_map, ImagingError, NormalizedBox};
use crate::inference::Detection;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: prediction {}x{}, ground truth {}x{}", pred.0, pred.1, gt.0, gt.1)]
    DimensionMismatch { pred: (u32, u32), gt: (u32, u32) },
    #[error("no image has ground truth; mAP is undefined")]
    NoGroundTruth,
    #[error("cannot build a report from zero samples")]
    EmptyReport,
    #[error("row {id:?} has {got} values, expected {expected}")]
    RowShape {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("no prediction for ground truth {0:?}")]
    MissingPrediction(String),
    #[error("{path}:{line}: malformed label line {text:?}")]
    Label {
        path: PathBuf,
        line: usize,
        text: String,
    },
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<MetricsError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

pub const SEG_COLUMNS: [&str; 5] = ["dice", "iou", "pixel_accuracy", "sensitivity", "specificity"];
pub const DET_COLUMNS: [&str; 3] = ["precision", "recall", "ap_at_50"];

/// Table for a set of per-sample segmentation scores (Dice first).
pub fn segmentation_table(scores: &[SegmentationScores]) -> ScoreTable {
    ScoreTable {
        kind: MetricKind::Seg,
        columns: SEG_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows: scores
            .iter()
            .map(|s| ScoreRow {
                id: s.id.clone(),
                values: vec![s.dice, s.iou, s.pixel_accuracy, s.sensitivity, s.specificity],
            })
            .collect(),
    }
}

/// Table for per-image detection scores (precision first; AP is NaN when
/// the image has no ground truth).
pub fn detection_table(scores: &[DetectionScores]) -> ScoreTable {
    ScoreTable {
        kind: MetricKind::Det,
        columns: DET_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows: scores
            .iter()
            .map(|s| ScoreRow {
                id: s.id.clone(),
                values: vec![s.precision, s.recall, s.ap_at_50.unwrap_or(f64::NAN)],
            })
            .collect(),
    }
}

fn files_by_stem(dir: &Path, exts: &[&str]) -> Result<BTreeMap<String, PathBuf>, MetricsError> {
    let io = |source| MetricsError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| exts.contains(&e.as_str())) {
            if let Some(stem) = path.file_stem() {
                out.insert(stem.to_string_lossy().into_owned(), path);
            }
        }
    }
    Ok(out)
}

pub struct SegmentationEvaluation {
    pub scores: Vec<SegmentationScores>,
    pub table: ScoreTable,
    pub report: EvaluationReport,
}

/// Evaluates every ground-truth mask in `gt_dir` against the same-stem file in
/// `pred_dir`. Predictions are read as probabilities (`value/255`) and
/// binarized at 0.5; the mean BCE of the raw probabilities is reported too.
pub fn evaluate_segmentation_dirs(
    pred_dir: &Path,
    gt_dir: &Path,
) -> Result<SegmentationEvaluation, MetricsError> {
    const EXTS: &[&str] = &["png", "jpg", "jpeg"];
    let preds = files_by_stem(pred_dir, EXTS)?;
    let gts = files_by_stem(gt_dir, EXTS)?;
    let mut scores = Vec::with_capacity(gts.len());
    let mut bce_sum = 0.0;
    for (id, gt_path) in &gts {
        let pred_path = preds
            .get(id)
            .ok_or_else(|| MetricsError::MissingPrediction(id.clone()))?;
        let gt = load_mask(gt_path)?;
        let prob = load_probability_map(pred_path)?;
        let wrap = |e: MetricsError| MetricsError::Sample {
            id: id.clone(),
            source: Box::new(e),
        };
        let pred = threshold_map(&prob, 0.5);
        scores.push(score_segmentation(id, &pred, &gt).map_err(wrap)?);
        bce_sum += bce(&prob, &gt, BCE_EPSILON).map_err(wrap)?;
    }
    let table = segmentation_table(&scores);
    let mut report = build_report(&table)?;
    report.mean_bce = Some(bce_sum / scores.len() as f64);
    Ok(SegmentationEvaluation {
        scores,
        table,
        report,
    })
}

/// Reads a YOLO label file. Lines with a sixth field carry a confidence;
/// lines without one get confidence 1.0.
pub fn read_label_file(path: &Path) -> Result<Vec<Detection>, MetricsError> {
    let text = fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (class_id, b, conf) = parse_yolo_line(l).ok_or_else(|| MetricsError::Label {
                path: path.to_path_buf(),
                line: i + 1,
                text: l.to_string(),
            })?;
            Ok(Detection {
                r#box: b,
                confidence: conf.unwrap_or(1.0).clamp(0.0, 1.0),
                class_id,
            })
        })
        .collect()
}

pub struct DetectionEvaluation {
    pub scores: Vec<DetectionScores>,
    pub matches: Vec<MatchSet>,
    pub table: ScoreTable,
    pub report: EvaluationReport,
}

/// Evaluates YOLO-format predictions (`0 xc yc w h conf`) against YOLO
/// ground-truth labels, one `.txt` per image keyed by stem. An image with a
/// ground-truth file but no prediction file has no predictions.
pub fn evaluate_detection_dirs(
    pred_dir: &Path,
    gt_dir: &Path,
    conf_threshold: f64,
    iou_min: f64,
) -> Result<DetectionEvaluation, MetricsError> {
    let preds = files_by_stem(pred_dir, &["txt"])?;
    let gts = files_by_stem(gt_dir, &["txt"])?;
    let mut scores = Vec::with_capacity(gts.len());
    let mut matches = Vec::with_capacity(gts.len());
    for (id, gt_path) in &gts {
        let gt_boxes: Vec<NormalizedBox> =
            read_label_file(gt_path)?.into_iter().map(|d| d.r#box).collect();
        let pred: Vec<Detection> = match preds.get(id) {
            Some(p) => read_label_file(p)?
                .into_iter()
                .filter(|d| d.confidence >= conf_threshold)
                .collect(),
            None => Vec::new(),
        };
        let (s, m) = score_detections(id, &pred, &gt_boxes, iou_min);
        scores.push(s);
        matches.push(m);
    }
    let table = detection_table(&scores);
    let mut report = build_report(&table)?;
    report.map_at_50 = map_at_50(&matches).ok();
    let pairs: Vec<(f64, f64)> = scores
        .iter()
        .flat_map(|s| s.matched.iter().map(|&(iou, conf)| (conf, iou)))
        .collect();
    report.confidence_iou_correlation = Some(Correlation {
        n: pairs.len(),
        pearson: pearson(&pairs),
        spearman: spearman(&pairs),
    });
    Ok(DetectionEvaluation {
        scores,
        matches,
        table,
        report,
    })
}
