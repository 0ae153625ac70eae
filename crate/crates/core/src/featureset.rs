//! The ordered feature vector, script labels, and the features CSV.
//!
//! | index  | features  | block                                  |
//! |--------|-----------|----------------------------------------|
//! | 0..8   | F1-F8     | chain-code histogram                   |
//! | 8..15  | F9-F15    | first-difference (signed turn) histogram |
//! | 15     | F16       | perimeter length                       |
//! | 16     | F17       | circularity                            |
//! | 17..22 | F18-F22   | slope-angle counts                     |
//! | 22..54 | F23-F54   | grid DFT (mean, std) per cell          |

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contour::{contour_features, ContourFeatures};
use crate::error::{Error, Result};
use crate::raster::{gaussian_smooth, otsu_binarize, BinaryImage, GrayImage, InkPolarity};
use crate::spectral::{spectral_features, DEFAULT_GRID};

pub const FEATURE_COUNT: usize = 54;
pub const CCH: Range<usize> = 0..8;
pub const FIRST_DIFF: Range<usize> = 8..15;
pub const PERIMETER: usize = 15;
pub const CIRCULARITY: usize = 16;
pub const SLOPES: Range<usize> = 17..22;
pub const SPECTRAL: Range<usize> = 22..54;

pub const DEFAULT_LABELS: [&str; 8] = [
    "Gujarati",
    "Kannada",
    "Malayalam",
    "Oriya",
    "Tamil",
    "Telugu",
    "Urdu",
    "Roman",
];

/// Feature count for an `n x n` spectral grid.
pub fn feature_count(grid: usize) -> usize {
    ContourFeatures::LEN + 2 * grid * grid
}

/// A script name known to some [`LabelSet`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScriptLabel(String);

impl ScriptLabel {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ScriptLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered set of admissible labels. The order fixes class indices and every
/// tie-break.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    names: Vec<String>,
}

impl Default for LabelSet {
    fn default() -> Self {
        LabelSet {
            names: DEFAULT_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl LabelSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut out = LabelSet { names: Vec::new() };
        for name in names {
            out.push(name)?;
        }
        if out.names.is_empty() {
            return Err(Error::InvalidParameter("label set is empty".into()));
        }
        Ok(out)
    }

    /// Appends a new label; `Ok(false)` if it is already present.
    pub fn push(&mut self, name: impl Into<String>) -> Result<bool> {
        let name = name.into();
        if name.is_empty() || name.contains([',', '"', '\n', '\r']) {
            return Err(Error::InvalidParameter(format!("invalid label name `{name}`")));
        }
        if self.names.contains(&name) {
            return Ok(false);
        }
        self.names.push(name);
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn label(&self, name: &str) -> Result<ScriptLabel> {
        self.index_of(name)
            .map(|_| ScriptLabel(name.to_string()))
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn by_index(&self, index: usize) -> ScriptLabel {
        ScriptLabel(self.names[index].clone())
    }
}

/// One text line's features, F1 first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    pub label: Option<ScriptLabel>,
    pub source: Option<String>,
}

impl FeatureVector {
    /// Accepts `22 + 2 n^2` finite values for some grid size `n >= 1`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if grid_for(values.len()).is_none() {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_COUNT,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { sample: 0, feature: i });
        }
        Ok(FeatureVector {
            values,
            label: None,
            source: None,
        })
    }

    pub fn with_label(mut self, label: ScriptLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn grid_for(len: usize) -> Option<usize> {
    let rest = len.checked_sub(ContourFeatures::LEN)?;
    if rest == 0 || rest % 2 != 0 {
        return None;
    }
    let n = (1..=rest).find(|n| n * n * 2 >= rest)?;
    (2 * n * n == rest).then_some(n)
}

/// Preprocessing and grid parameters for [`extract_features`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub sigma: f64,
    pub kernel_size: usize,
    pub polarity: InkPolarity,
    pub grid: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            sigma: 1.0,
            kernel_size: 5,
            polarity: InkPolarity::DarkInk,
            grid: DEFAULT_GRID,
        }
    }
}

/// Smooth, binarize, then concatenate the contour and spectral blocks.
pub fn extract_features(img: &GrayImage, config: &ExtractConfig) -> Result<FeatureVector> {
    let smooth = gaussian_smooth(img, config.sigma, config.kernel_size)?;
    let binary = otsu_binarize(&smooth, config.polarity);
    features_from_binary(&binary, config.grid)
}

/// Feature vector of an already binarized line.
pub fn features_from_binary(binary: &BinaryImage, grid: usize) -> Result<FeatureVector> {
    let mut values = contour_features(binary).to_array().to_vec();
    values.extend(spectral_features(binary, grid)?.to_vec());
    FeatureVector::new(values)
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// CSV header `label,source,f1..fD`.
pub fn csv_header(dim: usize) -> Vec<String> {
    let mut header = vec!["label".to_string(), "source".to_string()];
    header.extend((1..=dim).map(|i| format!("f{i}")));
    header
}

/// Writes rows as CSV; values carry 17 significant digits.
pub fn write_features(rows: &[FeatureVector], dest: impl AsRef<Path>) -> Result<()> {
    let dest = dest.as_ref();
    let bytes = features_to_csv(rows)?;
    fs::write(dest, bytes).map_err(|e| Error::io(dest, e))
}

pub fn features_to_csv(rows: &[FeatureVector]) -> Result<Vec<u8>> {
    let dim = rows.first().map_or(FEATURE_COUNT, |r| r.values.len());
    if let Some(first) = rows.first() {
        let labelled = first.label.is_some();
        if rows.iter().any(|r| r.label.is_some() != labelled) {
            return Err(Error::InvalidParameter(
                "rows must be uniformly labelled or uniformly unlabelled".into(),
            ));
        }
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidParameter(e.to_string());
    writer.write_record(csv_header(dim)).map_err(csv_err)?;
    for row in rows {
        if row.values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.values.len(),
            });
        }
        let mut record = vec![
            row.label.as_ref().map_or(String::new(), |l| l.0.clone()),
            row.source.clone().unwrap_or_default(),
        ];
        record.extend(row.values.iter().map(|v| format!("{v:.16e}")));
        writer.write_record(&record).map_err(csv_err)?;
    }
    writer.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Reads a features CSV, validating labels against `labels`.
pub fn read_features(src: impl AsRef<Path>, labels: &LabelSet) -> Result<Vec<FeatureVector>> {
    let src = src.as_ref();
    let bytes = fs::read(src).map_err(|e| Error::io(src, e))?;
    parse_features(&bytes, src, labels)
}

pub fn parse_features(bytes: &[u8], src: &Path, labels: &LabelSet) -> Result<Vec<FeatureVector>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| parse_error(src, 1, e.to_string()))?,
        None => return Err(parse_error(src, 1, "missing header")),
    };
    let dim = header.len().saturating_sub(2);
    if grid_for(dim).is_none() || header.iter().ne(csv_header(dim).iter().map(String::as_str)) {
        return Err(parse_error(
            src,
            1,
            format!(
                "expected header `label,source,f1..f{FEATURE_COUNT}`, found {} columns",
                header.len()
            ),
        ));
    }

    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| parse_error(src, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != dim + 2 {
            return Err(parse_error(
                src,
                line,
                format!("expected {} columns, found {}", dim + 2, rec.len()),
            ));
        }
        let mut values = Vec::with_capacity(dim);
        for (i, field) in rec.iter().skip(2).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(src, line, format!("f{}: `{field}` is not a number", i + 1)))?;
            if !v.is_finite() {
                return Err(parse_error(
                    src,
                    line,
                    format!("f{}: non-finite value `{field}`", i + 1),
                ));
            }
            values.push(v);
        }
        let mut fv = FeatureVector::new(values).map_err(|e| parse_error(src, line, e.to_string()))?;
        if !rec[0].is_empty() {
            fv.label = Some(
                labels
                    .label(&rec[0])
                    .map_err(|e| parse_error(src, line, e.to_string()))?,
            );
        }
        if !rec[1].is_empty() {
            fv.source = Some(rec[1].to_string());
        }
        rows.push(fv);
    }
    Ok(rows)
}
