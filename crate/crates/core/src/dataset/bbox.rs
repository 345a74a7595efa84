use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::DatasetError;
use crate::imaging::PixelBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BBoxRecord {
    pub image_id: String,
    pub label: String,
    pub r#box: PixelBox,
}

/// A record that could not be turned into a [`BBoxRecord`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDiagnostic {
    pub image_id: String,
    pub index: usize,
    pub message: String,
}

impl std::fmt::Display for RecordDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}[{}]: {}", self.image_id, self.index, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BBoxParse {
    pub records: BTreeMap<String, Vec<BBoxRecord>>,
    pub diagnostics: Vec<RecordDiagnostic>,
}

/// Parses a bounding-box annotation document.
///
/// Both `{"id": {"bbox": [...]}}` (the layout shipped with the dataset,
/// which also carries `height`/`width`) and the flat `{"id": [...]}` form
/// are accepted. Bad records are skipped and reported in `diagnostics`;
/// only malformed JSON or an unexpected top-level shape fails the call.
pub fn parse_bbox_json(bytes: &[u8]) -> Result<BBoxParse, DatasetError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| DatasetError::Json {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let Value::Object(top) = doc else {
        return Err(DatasetError::Schema("top level must be an object".into()));
    };

    let mut out = BBoxParse::default();
    for (image_id, entry) in top {
        let list = match &entry {
            Value::Array(items) => items.as_slice(),
            Value::Object(obj) => match obj.get("bbox") {
                Some(Value::Array(items)) => items.as_slice(),
                _ => {
                    out.diagnostics.push(RecordDiagnostic {
                        image_id: image_id.clone(),
                        index: 0,
                        message: "entry has no \"bbox\" array".into(),
                    });
                    continue;
                }
            },
            _ => {
                out.diagnostics.push(RecordDiagnostic {
                    image_id: image_id.clone(),
                    index: 0,
                    message: "entry must be an object or an array".into(),
                });
                continue;
            }
        };
        if image_id.is_empty() {
            out.diagnostics.push(RecordDiagnostic {
                image_id,
                index: 0,
                message: "empty image id".into(),
            });
            continue;
        }
        let records = out.records.entry(image_id.clone()).or_default();
        for (index, item) in list.iter().enumerate() {
            match parse_record(&image_id, item) {
                Ok(r) => records.push(r),
                Err(message) => out.diagnostics.push(RecordDiagnostic {
                    image_id: image_id.clone(),
                    index,
                    message,
                }),
            }
        }
    }
    Ok(out)
}

fn parse_record(image_id: &str, item: &Value) -> Result<BBoxRecord, String> {
    let obj = item.as_object().ok_or("record must be an object")?;
    let coord = |key: &str| -> Result<i64, String> {
        let v = obj.get(key).ok_or_else(|| format!("missing key \"{key}\""))?;
        if let Some(i) = v.as_i64() {
            return Ok(i);
        }
        match v.as_f64() {
            Some(f) if f.fract() == 0.0 => Ok(f as i64),
            _ => Err(format!("key \"{key}\" is not an integer: {v}")),
        }
    };
    let (xmin, ymin, xmax, ymax) = (coord("xmin")?, coord("ymin")?, coord("xmax")?, coord("ymax")?);
    if xmin >= xmax || ymin >= ymax {
        return Err(format!("degenerate box ({xmin}, {ymin}, {xmax}, {ymax})"));
    }
    if xmin < 0 || ymin < 0 {
        return Err(format!("negative coordinate in ({xmin}, {ymin}, {xmax}, {ymax})"));
    }
    let label = obj
        .get("label")
        .and_then(Value::as_str)
        .unwrap_or("polyp")
        .to_string();
    Ok(BBoxRecord {
        image_id: image_id.to_string(),
        label,
        r#box: PixelBox::from_corners_unchecked(xmin as f64, ymin as f64, xmax as f64, ymax as f64),
    })
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start = bytes
        .split_inclusive(|&b| b == b'\n')
        .take(line - 1)
        .map(<[u8]>::len)
        .sum::<usize>();
    (line_start + column.saturating_sub(1)).min(bytes.len())
}
