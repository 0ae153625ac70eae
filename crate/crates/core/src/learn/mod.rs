//! Trainable classifiers over feature vectors: k-NN, Gaussian naive Bayes
//! and a one-vs-one SVM. Every model z-scores its input with statistics
//! fitted on the training rows.

mod bayes;
mod knn;
mod svm;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bayes::{NaiveBayesModel, VARIANCE_FLOOR};
pub use knn::KnnModel;
pub use svm::{solve_smo, Kernel, PairwiseSvm, SmoSolution, SvmModel, SvmParams};

use crate::error::{Error, Result};
use crate::featureset::{FeatureVector, LabelSet, ScriptLabel};

/// First line of every model file is `MODEL_MAGIC <version>`.
pub const MODEL_MAGIC: &str = "SCRIPTLINE-MODEL";
pub const MODEL_VERSION: u32 = 1;

const STD_FLOOR: f64 = 1e-12;

/// Per-feature z-score transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics of `rows`; near-constant columns keep unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let std = (0..dim)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                let s = var.sqrt();
                if s < STD_FLOOR {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Classifier choice plus hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Knn { k: usize },
    NaiveBayes,
    Svm(SvmParams),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::NaiveBayes => "naive-bayes",
            ModelSpec::Svm(_) => "svm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "kebab-case")]
pub enum ModelParams {
    Knn(KnnModel),
    NaiveBayes(NaiveBayesModel),
    Svm(SvmModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub label: ScriptLabel,
    /// Per-class pseudo-distribution summing to 1: vote fractions for k-NN
    /// and SVM, posteriors for naive Bayes.
    pub scores: Vec<f64>,
    /// Per-class values used for ranking (ROC): summed decision margins for
    /// the SVM, otherwise identical to `scores`.
    pub ranking: Vec<f64>,
}

/// A fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    labels: LabelSet,
    standardizer: Standardizer,
    model: ModelParams,
}

/// Index of the largest value; earlier indices win ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn validate(rows: &[Vec<f64>], targets: &[usize], n_classes: usize) -> Result<()> {
    let Some(first) = rows.first() else {
        return Err(Error::EmptyDataset);
    };
    if rows.len() != targets.len() {
        return Err(Error::InvalidParameter(format!(
            "{} rows but {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let dim = first.len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { sample: i, feature: j });
        }
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= n_classes) {
        return Err(Error::InvalidParameter(format!(
            "target {t} outside {n_classes} classes"
        )));
    }
    Ok(())
}

impl TrainedModel {
    /// Fits on labelled feature vectors. The model's classes are the labels
    /// present in `data`, kept in `labels` order.
    pub fn fit(spec: &ModelSpec, data: &[FeatureVector], labels: &LabelSet) -> Result<Self> {
        let mut present = vec![false; labels.len()];
        let mut full_targets = Vec::with_capacity(data.len());
        for (i, fv) in data.iter().enumerate() {
            let label = fv
                .label
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter(format!("training sample {i} has no label")))?;
            let idx = labels
                .index_of(label.as_str())
                .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
            present[idx] = true;
            full_targets.push(idx);
        }
        let remap: Vec<Option<usize>> = present
            .iter()
            .scan(0usize, |next, &p| {
                Some(p.then(|| {
                    *next += 1;
                    *next - 1
                }))
            })
            .collect();
        let model_labels = LabelSet::new(
            labels
                .names()
                .iter()
                .zip(&present)
                .filter(|(_, &p)| p)
                .map(|(n, _)| n.clone()),
        )
        .map_err(|_| Error::EmptyDataset)?;
        let targets: Vec<usize> = full_targets.iter().map(|&t| remap[t].expect("present")).collect();
        let rows: Vec<Vec<f64>> = data.iter().map(|fv| fv.values().to_vec()).collect();
        Self::fit_rows(spec, &rows, &targets, model_labels)
    }

    /// Fits on raw rows with class indices into `labels`. Every label must
    /// have at least one row.
    pub fn fit_rows(spec: &ModelSpec, rows: &[Vec<f64>], targets: &[usize], labels: LabelSet) -> Result<Self> {
        validate(rows, targets, labels.len())?;
        let mut counts = vec![0usize; labels.len()];
        targets.iter().for_each(|&t| counts[t] += 1);
        let distinct = counts.iter().filter(|&&c| c > 0).count();
        if distinct < 2 {
            return Err(Error::SingleClass(distinct));
        }
        if let Some(c) = counts.iter().position(|&c| c == 0) {
            return Err(Error::ClassTooSmall {
                label: labels.names()[c].clone(),
                count: 0,
                required: 1,
            });
        }
        match spec {
            ModelSpec::Knn { k } if *k == 0 => return Err(Error::InvalidParameter("k must be at least 1".into())),
            ModelSpec::Svm(p) if !(p.c > 0.0 && p.c.is_finite()) => {
                return Err(Error::InvalidParameter(format!("C must be positive, got {}", p.c)))
            }
            ModelSpec::Svm(SvmParams {
                kernel: Kernel::Rbf { gamma },
                ..
            }) if !(*gamma > 0.0 && gamma.is_finite()) => {
                return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")))
            }
            _ => {}
        }

        let standardizer = Standardizer::fit(rows);
        let z: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.apply(r)).collect();
        let model = match *spec {
            ModelSpec::Knn { k } => ModelParams::Knn(KnnModel::fit(&z, targets, k)),
            ModelSpec::NaiveBayes => ModelParams::NaiveBayes(NaiveBayesModel::fit(&z, targets, labels.len())),
            ModelSpec::Svm(params) => ModelParams::Svm(SvmModel::fit(&z, targets, labels.len(), params)),
        };
        Ok(TrainedModel {
            labels,
            standardizer,
            model,
        })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn params(&self) -> &ModelParams {
        &self.model
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn kind_name(&self) -> &'static str {
        match self.model {
            ModelParams::Knn(_) => "knn",
            ModelParams::NaiveBayes(_) => "naive-bayes",
            ModelParams::Svm(_) => "svm",
        }
    }

    pub fn dim(&self) -> usize {
        self.standardizer.mean.len()
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction> {
        self.predict_row(x.values())
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { sample: 0, feature: j });
        }
        let z = self.standardizer.apply(x);
        let n = self.labels.len();
        let (class, scores, ranking) = match &self.model {
            ModelParams::Knn(m) => {
                let s = m.vote_fractions(&z, n);
                (argmax(&s), s.clone(), s)
            }
            ModelParams::NaiveBayes(m) => {
                let s = m.posteriors(&z);
                (argmax(&s), s.clone(), s)
            }
            ModelParams::Svm(m) => {
                let (votes, margins) = m.votes(&z, n);
                let top = votes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                // vote ties go to the larger summed margin, then label order
                let class = (0..n)
                    .filter(|&c| votes[c] == top)
                    .fold(None, |best: Option<usize>, c| match best {
                        Some(b) if margins[b] >= margins[c] => Some(b),
                        _ => Some(c),
                    })
                    .expect("at least two classes");
                let total: f64 = votes.iter().sum();
                (class, votes.iter().map(|v| v / total).collect(), margins)
            }
        };
        Ok(Prediction {
            class,
            label: self.labels.by_index(class),
            scores,
            ranking,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = format!("{MODEL_MAGIC} {MODEL_VERSION}\n").into_bytes();
        serde_json::to_writer(&mut out, self).map_err(|e| Error::ModelCorrupt(e.to_string()))?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::ModelCorrupt("missing header line".into()))?;
        let header =
            std::str::from_utf8(&bytes[..newline]).map_err(|_| Error::ModelCorrupt("header is not UTF-8".into()))?;
        let version = header
            .strip_prefix(MODEL_MAGIC)
            .and_then(|rest| rest.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::ModelCorrupt(format!("bad header `{header}`")))?;
        if version != MODEL_VERSION {
            return Err(Error::ModelVersion {
                found: version,
                supported: MODEL_VERSION,
            });
        }
        let model: TrainedModel =
            serde_json::from_slice(&bytes[newline + 1..]).map_err(|e| Error::ModelCorrupt(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let dim = self.dim();
        let n = self.labels.len();
        let bad = |m: &str| Err(Error::ModelCorrupt(m.to_string()));
        if self.standardizer.std.len() != dim || n < 2 {
            return bad("inconsistent standardizer or label set");
        }
        let ok = match &self.model {
            ModelParams::Knn(m) => {
                m.k >= 1
                    && m.exemplars.len() == m.targets.len()
                    && m.exemplars.iter().all(|e| e.len() == dim)
                    && m.targets.iter().all(|&t| t < n)
            }
            ModelParams::NaiveBayes(m) => {
                m.log_priors.len() == n
                    && m.means.len() == n
                    && m.variances.len() == n
                    && m.means.iter().chain(&m.variances).all(|v| v.len() == dim)
            }
            ModelParams::Svm(m) => m.pairs.iter().all(|p| {
                p.positive < n
                    && p.negative < n
                    && p.support.len() == p.coef.len()
                    && p.support.iter().all(|s| s.len() == dim)
            }),
        };
        if ok {
            Ok(())
        } else {
            bad("parameter shapes do not match the declared dimension")
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
