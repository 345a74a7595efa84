//! Dataset tooling: manifests, the seeded train/val/test split, annotation
//! parsing, YOLO label emission and dimension statistics.

mod bbox;
mod pcg;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bbox::{parse_bbox_json, BBoxParse, BBoxRecord, RecordDiagnostic};
pub use pcg::Pcg32;

use crate::imaging::{box_to_yolo, ImagingError};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("unexpected annotation layout: {0}")]
    Schema(String),
    #[error("id list is empty")]
    EmptyIds,
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("no dimensions known for image {0:?}")]
    MissingDims(String),
    #[error("sample size must be between 1 and {available}, got {requested}")]
    SampleSize { requested: usize, available: usize },
    #[error("no mask found for image {0:?}")]
    MissingMask(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub image_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub width: u32,
    pub height: u32,
    pub file_size: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png"];

fn image_files(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

impl DatasetManifest {
    /// Scans `<root>/images` and pairs each image with `<root>/masks/<id>.*`.
    ///
    /// When `require_masks` is set, an image without a mask is an error;
    /// otherwise its `mask_path` is left empty.
    pub fn scan(root: &Path, require_masks: bool) -> Result<Self, DatasetError> {
        let images_dir = root.join("images");
        let masks_dir = root.join("masks");
        let masks: BTreeMap<String, PathBuf> = if masks_dir.is_dir() {
            image_files(&masks_dir)?
                .into_iter()
                .map(|p| (stem(&p), p))
                .collect()
        } else {
            BTreeMap::new()
        };

        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for path in image_files(&images_dir)? {
            let image_id = stem(&path);
            if !seen.insert(image_id.clone()) {
                return Err(DatasetError::DuplicateId(image_id));
            }
            let mask_path = masks.get(&image_id).cloned();
            if require_masks && mask_path.is_none() {
                return Err(DatasetError::MissingMask(image_id));
            }
            let (width, height) =
                image::image_dimensions(&path).map_err(|source| ImagingError::Image {
                    path: path.display().to_string(),
                    source,
                })?;
            let file_size = fs::metadata(&path).map_err(io_err(&path))?.len();
            entries.push(ManifestEntry {
                image_id,
                image_path: path,
                mask_path,
                width,
                height,
                file_size,
            });
        }
        Ok(Self { entries })
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.image_id.clone()).collect()
    }

    pub fn dims(&self) -> BTreeMap<String, (u32, u32)> {
        self.entries
            .iter()
            .map(|e| (e.image_id.clone(), (e.width, e.height)))
            .collect()
    }
}

/// Train/val/test partition. Field order is the serialized order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

impl SplitAssignment {
    /// Pretty JSON with a trailing newline; byte-stable for a given split.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("split serializes");
        s.push('\n');
        s
    }
}

/// Sizes for a 70/15/15 split: floor for train and val, remainder to test.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 70 / 100;
    let val = n * 15 / 100;
    (train, val, n - train - val)
}

/// Sorts `ids`, shuffles them with PCG32 seeded by `seed`, and slices
/// train/val/test in that order.
pub fn deterministic_split(ids: &[String], seed: u64) -> Result<SplitAssignment, DatasetError> {
    if ids.is_empty() {
        return Err(DatasetError::EmptyIds);
    }
    let mut sorted: Vec<String> = ids.to_vec();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(DatasetError::DuplicateId(w[0].clone()));
    }
    Pcg32::new(seed).shuffle(&mut sorted);
    let (n_train, n_val, _) = split_sizes(sorted.len());
    let test = sorted.split_off(n_train + n_val);
    let val = sorted.split_off(n_train);
    Ok(SplitAssignment {
        train: sorted,
        val,
        test,
        seed,
    })
}

/// Formats one YOLO label line, class index fixed at 0.
pub fn yolo_line(b: &crate::imaging::NormalizedBox) -> String {
    format!("0 {:.6} {:.6} {:.6} {:.6}", b.xc, b.yc, b.w, b.h)
}

/// Produces label-file text for every image in `dims`. Images without
/// annotations get an empty string.
pub fn emit_yolo_labels(
    records: &BTreeMap<String, Vec<BBoxRecord>>,
    dims: &BTreeMap<String, (u32, u32)>,
) -> Result<BTreeMap<String, String>, DatasetError> {
    if let Some(id) = records.keys().find(|id| !dims.contains_key(*id)) {
        return Err(DatasetError::MissingDims(id.clone()));
    }
    let mut out = BTreeMap::new();
    for (id, &(w, h)) in dims {
        let mut text = String::new();
        for rec in records.get(id).map(Vec::as_slice).unwrap_or_default() {
            let n = box_to_yolo(&rec.r#box, w, h)?;
            text.push_str(&yolo_line(&n));
            text.push('\n');
        }
        out.insert(id.clone(), text);
    }
    Ok(out)
}

/// Parses one YOLO label line `class xc yc w h [confidence]`.
pub fn parse_yolo_line(line: &str) -> Option<(u32, crate::imaging::NormalizedBox, Option<f64>)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 && fields.len() != 6 {
        return None;
    }
    let class = fields[0].parse().ok()?;
    let v: Vec<f64> = fields[1..].iter().map(|f| f.parse().ok()).collect::<Option<_>>()?;
    let b = crate::imaging::NormalizedBox::new(v[0], v[1], v[2], v[3]).ok()?;
    Some((class, b, v.get(4).copied()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionStats {
    pub n_sampled: usize,
    pub seed: u64,
    pub unique_dims: usize,
    pub mean_w: f64,
    pub mean_h: f64,
    pub min_dim: (u32, u32),
    pub max_dim: (u32, u32),
    pub mean_file_size_kb: f64,
}

/// Dimension statistics over a seeded random sample of the manifest.
///
/// Entries are ordered by id, shuffled with the same PCG32 generator used by
/// the split, and the first `sample_n` are taken. `min_dim`/`max_dim` are the
/// smallest and largest by pixel area (ties broken by width).
pub fn dataset_stats(
    manifest: &DatasetManifest,
    sample_n: usize,
    seed: u64,
) -> Result<DimensionStats, DatasetError> {
    if sample_n == 0 || sample_n > manifest.entries.len() {
        return Err(DatasetError::SampleSize {
            requested: sample_n,
            available: manifest.entries.len(),
        });
    }
    let mut order: Vec<&ManifestEntry> = manifest.entries.iter().collect();
    order.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    Pcg32::new(seed).shuffle(&mut order);
    let sample = &order[..sample_n];

    let n = sample_n as f64;
    let area_key = |e: &&&ManifestEntry| (e.width as u64 * e.height as u64, e.width);
    let min = sample.iter().min_by_key(area_key).expect("non-empty");
    let max = sample.iter().max_by_key(area_key).expect("non-empty");
    let unique: BTreeSet<(u32, u32)> = sample.iter().map(|e| (e.width, e.height)).collect();
    Ok(DimensionStats {
        n_sampled: sample_n,
        seed,
        unique_dims: unique.len(),
        mean_w: sample.iter().map(|e| e.width as f64).sum::<f64>() / n,
        mean_h: sample.iter().map(|e| e.height as f64).sum::<f64>() / n,
        min_dim: (min.width, min.height),
        max_dim: (max.width, max.height),
        mean_file_size_kb: sample.iter().map(|e| e.file_size as f64).sum::<f64>() / n / 1024.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("img{i:04}")).collect()
    }

    #[test]
    fn split_sizes_match_floor_rule() {
        let s = deterministic_split(&ids(1000), 42).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (700, 150, 150));
        let s = deterministic_split(&ids(10), 42).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (7, 1, 2));
    }

    #[test]
    fn split_is_deterministic() {
        let a = deterministic_split(&ids(1000), 42).unwrap().to_json();
        let b = deterministic_split(&ids(1000), 42).unwrap().to_json();
        assert_eq!(a, b);
        let c = deterministic_split(&ids(1000), 7).unwrap().to_json();
        assert_ne!(a, c);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(deterministic_split(&[], 42), Err(DatasetError::EmptyIds)));
        let dup = vec!["a".to_string(), "b".into(), "a".into()];
        assert!(matches!(deterministic_split(&dup, 42), Err(DatasetError::DuplicateId(_))));
    }

    #[test]
    fn labels_from_hand_computed_box() {
        let mut records = BTreeMap::new();
        records.insert(
            "a".to_string(),
            vec![
                BBoxRecord {
                    image_id: "a".into(),
                    label: "polyp".into(),
                    r#box: crate::imaging::PixelBox::new(10.0, 20.0, 50.0, 60.0).unwrap(),
                },
                BBoxRecord {
                    image_id: "a".into(),
                    label: "polyp".into(),
                    r#box: crate::imaging::PixelBox::new(0.0, 0.0, 100.0, 100.0).unwrap(),
                },
            ],
        );
        let mut dims = BTreeMap::new();
        dims.insert("a".to_string(), (100, 100));
        dims.insert("b".to_string(), (64, 64));
        let out = emit_yolo_labels(&records, &dims).unwrap();
        assert_eq!(
            out["a"],
            "0 0.300000 0.400000 0.400000 0.400000\n0 0.500000 0.500000 1.000000 1.000000\n"
        );
        assert_eq!(out["b"], "");

        dims.remove("a");
        assert!(matches!(
            emit_yolo_labels(&records, &dims),
            Err(DatasetError::MissingDims(id)) if id == "a"
        ));
    }

    fn entry(id: &str, w: u32, h: u32) -> ManifestEntry {
        ManifestEntry {
            image_id: id.into(),
            image_path: PathBuf::from(format!("{id}.png")),
            mask_path: None,
            width: w,
            height: h,
            file_size: 2048,
        }
    }

    #[test]
    fn stats_small_cases() {
        let m = DatasetManifest {
            entries: vec![entry("a", 100, 100), entry("b", 200, 200)],
        };
        let s = dataset_stats(&m, 2, 42).unwrap();
        assert_eq!((s.mean_w, s.mean_h, s.unique_dims), (150.0, 150.0, 2));
        assert_eq!(s.min_dim, (100, 100));
        assert_eq!(s.max_dim, (200, 200));
        assert_eq!(s.mean_file_size_kb, 2.0);

        let one = DatasetManifest {
            entries: vec![entry("a", 421, 444)],
        };
        let s = dataset_stats(&one, 1, 42).unwrap();
        assert_eq!((s.mean_w, s.mean_h), (421.0, 444.0));
        assert_eq!(s.min_dim, s.max_dim);

        assert!(matches!(dataset_stats(&m, 0, 42), Err(DatasetError::SampleSize { .. })));
        assert!(matches!(dataset_stats(&m, 3, 42), Err(DatasetError::SampleSize { .. })));
    }

    #[test]
    fn scan_pairs_images_and_masks() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("images")).unwrap();
        fs::create_dir_all(dir.path().join("masks")).unwrap();
        for id in ["b", "a"] {
            let f = crate::imaging::Frame::filled(3, 2, [1, 2, 3]);
            crate::imaging::save_frame(&f, &dir.path().join(format!("images/{id}.png"))).unwrap();
            let m = crate::imaging::BinaryMask::zeros(3, 2);
            crate::imaging::save_mask(&m, &dir.path().join(format!("masks/{id}.png"))).unwrap();
        }
        let m = DatasetManifest::scan(dir.path(), true).unwrap();
        assert_eq!(m.ids(), vec!["a", "b"]);
        assert_eq!((m.entries[0].width, m.entries[0].height), (3, 2));
        assert!(m.entries[0].file_size > 0);

        fs::remove_file(dir.path().join("masks/b.png")).unwrap();
        assert!(matches!(
            DatasetManifest::scan(dir.path(), true),
            Err(DatasetError::MissingMask(id)) if id == "b"
        ));
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 1usize..300, seed in any::<u64>()) {
            let ids = ids(n);
            let s = deterministic_split(&ids, seed).unwrap();
            let mut all: Vec<String> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
            prop_assert_eq!(all.len(), n);
            all.sort();
            prop_assert_eq!(all, ids);
            prop_assert_eq!((s.train.len(), s.val.len(), s.test.len()), split_sizes(n));
        }

        #[test]
        fn split_ignores_input_order(n in 2usize..100, seed in any::<u64>(), rot in 0usize..100) {
            let ids = ids(n);
            let mut rotated = ids.clone();
            rotated.rotate_left(rot % n);
            rotated.reverse();
            prop_assert_eq!(deterministic_split(&ids, seed).unwrap(), deterministic_split(&rotated, seed).unwrap());
        }

        #[test]
        fn labels_parse_back(x0 in 0u32..99, y0 in 0u32..99, dw in 1u32..100, dh in 1u32..100) {
            let (x1, y1) = ((x0 + dw).min(100), (y0 + dh).min(100));
            let b = crate::imaging::PixelBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64).unwrap();
            let want = box_to_yolo(&b, 100, 100).unwrap();
            let (class, got, conf) = parse_yolo_line(&yolo_line(&want)).unwrap();
            prop_assert_eq!(class, 0);
            prop_assert!(conf.is_none());
            for (p, q) in [(want.xc, got.xc), (want.yc, got.yc), (want.w, got.w), (want.h, got.h)] {
                prop_assert!((p - q).abs() <= 1e-6);
            }
        }
    }
}
