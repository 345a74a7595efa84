use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::measure::MeasurementEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Unknown,
    Diminutive,
    Small,
    Large,
}

impl SizeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SizeClass::Unknown => "unknown",
            SizeClass::Diminutive => "diminutive",
            SizeClass::Small => "small",
            SizeClass::Large => "large",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("mm_per_px must be a positive finite number, got {0}")]
    Scale(f64),
    #[error("size thresholds must satisfy 0 < diminutive_below_mm < large_from_mm (got {0} and {1})")]
    Thresholds(f64, f64),
}

/// Pixel scale and size-class boundaries. `mm_per_px = None` means the
/// stream is uncalibrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub mm_per_px: Option<f64>,
    pub diminutive_below_mm: f64,
    pub large_from_mm: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            mm_per_px: None,
            diminutive_below_mm: 5.0,
            large_from_mm: 10.0,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if let Some(s) = self.mm_per_px {
            if !(s.is_finite() && s > 0.0) {
                return Err(CalibrationError::Scale(s));
            }
        }
        let (lo, hi) = (self.diminutive_below_mm, self.large_from_mm);
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(CalibrationError::Thresholds(lo, hi));
        }
        Ok(())
    }

    pub fn class_for_mm(&self, diameter_mm: f64) -> SizeClass {
        if diameter_mm < self.diminutive_below_mm {
            SizeClass::Diminutive
        } else if diameter_mm < self.large_from_mm {
            SizeClass::Small
        } else {
            SizeClass::Large
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub size_class: SizeClass,
    pub diameter_mm: Option<f64>,
    pub area_mm2: Option<f64>,
    pub margin_mm: Option<f64>,
}

pub fn classify_risk(m: &MeasurementEstimate, calib: &CalibrationConfig) -> RiskAssessment {
    match calib.mm_per_px {
        None => RiskAssessment {
            size_class: SizeClass::Unknown,
            diameter_mm: None,
            area_mm2: None,
            margin_mm: None,
        },
        Some(s) => {
            let d = m.diameter_smoothed * s;
            RiskAssessment {
                size_class: calib.class_for_mm(d),
                diameter_mm: Some(d),
                area_mm2: Some(m.area_smoothed * s * s),
                margin_mm: Some(m.margin_diameter * s),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn est(d: f64) -> MeasurementEstimate {
        MeasurementEstimate {
            diameter_smoothed: d,
            area_smoothed: std::f64::consts::PI * d * d / 4.0,
            ..Default::default()
        }
    }

    fn calibrated(s: f64) -> CalibrationConfig {
        CalibrationConfig {
            mm_per_px: Some(s),
            ..Default::default()
        }
    }

    #[test]
    fn classes() {
        let r = classify_risk(&est(40.0), &calibrated(0.1));
        assert_eq!(r.size_class, SizeClass::Diminutive);
        assert!((r.diameter_mm.unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(classify_risk(&est(7.0), &calibrated(1.0)).size_class, SizeClass::Small);
        assert_eq!(classify_risk(&est(12.0), &calibrated(1.0)).size_class, SizeClass::Large);
        assert_eq!(classify_risk(&est(5.0), &calibrated(1.0)).size_class, SizeClass::Small);
        assert_eq!(classify_risk(&est(10.0), &calibrated(1.0)).size_class, SizeClass::Large);
        let u = classify_risk(&est(40.0), &CalibrationConfig::default());
        assert_eq!(u.size_class, SizeClass::Unknown);
        assert_eq!(u.diameter_mm, None);
    }

    #[test]
    fn validation() {
        assert!(CalibrationConfig::default().validate().is_ok());
        assert!(calibrated(0.0).validate().is_err());
        let bad = CalibrationConfig {
            diminutive_below_mm: 10.0,
            large_from_mm: 5.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn class_is_monotone(a in 0.0f64..500.0, b in 0.0f64..500.0, s in 0.01f64..1.0) {
            let (lo, hi) = (a.min(b), a.max(b));
            let c = calibrated(s);
            prop_assert!(classify_risk(&est(lo), &c).size_class <= classify_risk(&est(hi), &c).size_class);
        }
    }
}
