use serde::{Deserialize, Serialize};

use super::MetricsError;

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClinicalCategory {
    Poor,
    Moderate,
    Good,
    Excellent,
}

impl ClinicalCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClinicalCategory::Excellent => "Excellent",
            ClinicalCategory::Good => "Good",
            ClinicalCategory::Moderate => "Moderate",
            ClinicalCategory::Poor => "Poor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Dice, IoU and the pixel-level rates.
    Seg,
    /// Precision, recall and AP.
    Det,
}

/// Lower band edges `[excellent, good, moderate]`.
fn bands(kind: MetricKind) -> [f64; 3] {
    match kind {
        MetricKind::Seg => [0.8, 0.7, 0.5],
        MetricKind::Det => [0.9, 0.8, 0.6],
    }
}

pub fn categorize(value: f64, kind: MetricKind) -> ClinicalCategory {
    let [excellent, good, moderate] = bands(kind);
    if value >= excellent {
        ClinicalCategory::Excellent
    } else if value >= good {
        ClinicalCategory::Good
    } else if value >= moderate {
        ClinicalCategory::Moderate
    } else {
        ClinicalCategory::Poor
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub excellent: usize,
    pub good: usize,
    pub moderate: usize,
    pub poor: usize,
}

impl CategoryCounts {
    fn add(&mut self, c: ClinicalCategory) {
        match c {
            ClinicalCategory::Excellent => self.excellent += 1,
            ClinicalCategory::Good => self.good += 1,
            ClinicalCategory::Moderate => self.moderate += 1,
            ClinicalCategory::Poor => self.poor += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.excellent + self.good + self.moderate + self.poor
    }
}

/// Per-sample metric values. `values[i]` belongs to column `i` of the table;
/// NaN marks a value that is undefined for that sample (excluded from the
/// summary, written as an empty CSV field).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub kind: MetricKind,
    pub columns: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    /// Samples with a defined value.
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// 20 uniform bins over `[0, 1]`; 1.0 falls in the last bin.
    pub histogram: Vec<usize>,
    pub categories: CategoryCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub n: usize,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub kind: MetricKind,
    pub sample_count: usize,
    /// Column whose category is reported per sample.
    pub primary_metric: String,
    pub metrics: Vec<MetricSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_at_50: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_bce: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_iou_correlation: Option<Correlation>,
}

impl EvaluationReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

pub fn histogram_bin(v: f64) -> usize {
    ((v.clamp(0.0, 1.0) * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
}

/// Summarizes a score table: per-column mean, spread, histogram and
/// category tallies. The first column is the primary metric.
pub fn build_report(table: &ScoreTable) -> Result<EvaluationReport, MetricsError> {
    if table.rows.is_empty() {
        return Err(MetricsError::EmptyReport);
    }
    if table.columns.is_empty() {
        return Err(MetricsError::EmptyReport);
    }
    if let Some(bad) = table.rows.iter().find(|r| r.values.len() != table.columns.len()) {
        return Err(MetricsError::RowShape {
            id: bad.id.clone(),
            expected: table.columns.len(),
            got: bad.values.len(),
        });
    }
    let metrics = table
        .columns
        .iter()
        .enumerate()
        .filter_map(|(i, name)| {
            let col: Vec<f64> = table
                .rows
                .iter()
                .map(|r| r.values[i])
                .filter(|v| !v.is_nan())
                .collect();
            if col.is_empty() {
                return None;
            }
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let mut histogram = vec![0; HISTOGRAM_BINS];
            let mut categories = CategoryCounts::default();
            for &v in &col {
                histogram[histogram_bin(v)] += 1;
                categories.add(categorize(v, table.kind));
            }
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some(MetricSummary {
                name: name.clone(),
                count: col.len(),
                mean: mean.clamp(min, max),
                std: var.sqrt(),
                min,
                max,
                histogram,
                categories,
            })
        })
        .collect();
    Ok(EvaluationReport {
        kind: table.kind,
        sample_count: table.rows.len(),
        primary_metric: table.columns[0].clone(),
        metrics,
        map_at_50: None,
        mean_bce: None,
        confidence_iou_correlation: None,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-sample CSV: `id,<columns...>,category`, category of the first column.
pub fn table_to_csv(table: &ScoreTable) -> String {
    let mut out = String::from("id");
    for c in &table.columns {
        out.push(',');
        out.push_str(&csv_field(c));
    }
    out.push_str(",category\n");
    for r in &table.rows {
        out.push_str(&csv_field(&r.id));
        for v in &r.values {
            if v.is_nan() {
                out.push(',');
            } else {
                out.push_str(&format!(",{v:.6}"));
            }
        }
        let cat = r
            .values
            .first()
            .filter(|v| !v.is_nan())
            .map(|&v| categorize(v, table.kind));
        out.push(',');
        out.push_str(cat.map_or("", |c| c.as_str()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(values: &[f64]) -> ScoreTable {
        ScoreTable {
            kind: MetricKind::Seg,
            columns: vec!["dice".into()],
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &v)| ScoreRow {
                    id: format!("s{i}"),
                    values: vec![v],
                })
                .collect(),
        }
    }

    #[test]
    fn categorize_examples() {
        assert_eq!(categorize(0.85, MetricKind::Seg), ClinicalCategory::Excellent);
        assert_eq!(categorize(0.95, MetricKind::Det), ClinicalCategory::Excellent);
        assert_eq!(categorize(0.55, MetricKind::Seg), ClinicalCategory::Moderate);
        assert_eq!(categorize(0.8, MetricKind::Seg), ClinicalCategory::Excellent);
        assert_eq!(categorize(0.7, MetricKind::Seg), ClinicalCategory::Good);
        assert_eq!(categorize(0.49, MetricKind::Seg), ClinicalCategory::Poor);
        assert_eq!(categorize(0.85, MetricKind::Det), ClinicalCategory::Good);
        assert_eq!(categorize(0.6, MetricKind::Det), ClinicalCategory::Moderate);
        assert_eq!(categorize(0.59, MetricKind::Det), ClinicalCategory::Poor);
    }

    #[test]
    fn report_examples() {
        let r = build_report(&table(&[0.7])).unwrap();
        let d = r.metric("dice").unwrap();
        assert_eq!(d.mean, 0.7);
        assert_eq!(d.histogram.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(d.histogram[14], 1);

        let r = build_report(&table(&[0.6, 0.8])).unwrap();
        assert!((r.metrics[0].mean - 0.7).abs() < 1e-12);
        assert_eq!(r.metrics[0].categories.excellent, 1);
        assert_eq!(r.metrics[0].categories.moderate, 1);

        assert!(matches!(build_report(&table(&[])), Err(MetricsError::EmptyReport)));

        let r = build_report(&table(&[0.5, f64::NAN])).unwrap();
        assert_eq!((r.sample_count, r.metrics[0].count, r.metrics[0].mean), (2, 1, 0.5));
        assert_eq!(histogram_bin(1.0), 19);
        assert_eq!(histogram_bin(0.0), 0);
    }

    #[test]
    fn csv_layout() {
        let mut t = table(&[0.85, 0.3]);
        t.rows[1].id = "a,b".into();
        let csv = table_to_csv(&t);
        assert_eq!(csv, "id,dice,category\ns0,0.850000,Excellent\n\"a,b\",0.300000,Poor\n");
    }

    proptest! {
        #[test]
        fn report_totals(values in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
            let r = build_report(&table(&values)).unwrap();
            let m = &r.metrics[0];
            prop_assert_eq!(m.categories.total(), values.len());
            prop_assert_eq!(m.histogram.iter().sum::<usize>(), values.len());
            prop_assert!(m.min <= m.mean && m.mean <= m.max);
        }

        #[test]
        fn categorize_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = (a.min(b), a.max(b));
            for kind in [MetricKind::Seg, MetricKind::Det] {
                prop_assert!(categorize(lo, kind) <= categorize(hi, kind));
            }
        }
    }
}
