//! Confusion matrices and the per-class and aggregate statistics used to
//! report a classifier: TP/FP rates, precision, recall, F-measure, MCC,
//! one-vs-rest AUC, Cohen's kappa, MAE/RMSE of the class scores, and a
//! Wilson interval for accuracy.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::featureset::{FeatureVector, LabelSet};
use crate::learn::{ModelSpec, Prediction, TrainedModel};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Counts with rows = actual class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl BinaryCounts {
    pub fn tpr(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp as f64, (self.fp + self.tn) as f64)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> f64 {
        self.tpr()
    }

    pub fn f_measure(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        ratio(2.0 * p * r, p + r)
    }

    pub fn mcc(&self) -> f64 {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        ratio(tp * tn - fp * fn_, den)
    }
}

impl ConfusionMatrix {
    pub fn new(labels: &LabelSet) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels: labels.names().to_vec(),
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts(labels: &LabelSet, counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = labels.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(format!("confusion matrix must be {n}x{n}")));
        }
        Ok(ConfusionMatrix {
            labels: labels.names().to_vec(),
            counts,
        })
    }

    pub fn record(&mut self, actual: usize, predicted: usize) {
        self.counts[actual][predicted] += 1;
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.size()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.trace() as f64, self.total() as f64)
    }

    /// Cohen's kappa `(p_o - p_e) / (1 - p_e)`.
    pub fn kappa(&self) -> f64 {
        let total = self.total() as f64;
        if total == 0.0 {
            return 0.0;
        }
        let po = self.trace() as f64 / total;
        let pe: f64 = (0..self.size())
            .map(|c| (self.row_sum(c) as f64 / total) * (self.col_sum(c) as f64 / total))
            .sum();
        if (1.0 - pe).abs() < f64::EPSILON {
            // a single populated class on both axes
            return if po == 1.0 { 1.0 } else { 0.0 };
        }
        (po - pe) / (1.0 - pe)
    }

    pub fn binary(&self, c: usize) -> BinaryCounts {
        let tp = self.counts[c][c];
        let fn_ = self.row_sum(c) - tp;
        let fp = self.col_sum(c) - tp;
        BinaryCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fn_ - fp,
        }
    }

    /// Header row of labels, then `actual_label,count,...` per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("actual\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Area under the ROC curve via the Mann-Whitney statistic; tied scores
/// count one half. Returns 0.5 when either side is empty.
pub fn auc_mann_whitney(scores: &[f64], positive: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average 1-based ranks over tie groups
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return 0.5;
    }
    let rank_sum: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

/// Wilson score interval for `successes / n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ClassStats {
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub mcc: f64,
    pub auc: f64,
}

impl ClassStats {
    fn from_counts(b: &BinaryCounts, auc: f64) -> Self {
        ClassStats {
            tpr: b.tpr(),
            fpr: b.fpr(),
            precision: b.precision(),
            recall: b.recall(),
            f_measure: b.f_measure(),
            mcc: b.mcc(),
            auc,
        }
    }

    /// Average weighted by `weights` (per-class actual counts).
    pub fn weighted(stats: &[ClassStats], weights: &[f64]) -> ClassStats {
        let total: f64 = weights.iter().sum();
        let avg = |f: fn(&ClassStats) -> f64| ratio(stats.iter().zip(weights).map(|(s, w)| f(s) * w).sum(), total);
        ClassStats {
            tpr: avg(|s| s.tpr),
            fpr: avg(|s| s.fpr),
            precision: avg(|s| s.precision),
            recall: avg(|s| s.recall),
            f_measure: avg(|s| s.f_measure),
            mcc: avg(|s| s.mcc),
            auc: avg(|s| s.auc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub classifier: String,
    pub matrix: ConfusionMatrix,
    pub per_class: Vec<ClassStats>,
    pub weighted_average: ClassStats,
    pub accuracy: f64,
    pub kappa: f64,
    pub mae: f64,
    pub rmse: f64,
    pub ci95: (f64, f64),
}

impl EvaluationReport {
    /// Builds every statistic from actual classes and model predictions.
    pub fn from_predictions(
        classifier: &str,
        labels: &LabelSet,
        actual: &[usize],
        predictions: &[Prediction],
    ) -> Result<Self> {
        if actual.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if actual.len() != predictions.len() {
            return Err(Error::InvalidParameter("one prediction per sample required".into()));
        }
        let n_classes = labels.len();
        let mut matrix = ConfusionMatrix::new(labels);
        for (&a, p) in actual.iter().zip(predictions) {
            matrix.record(a, p.class);
        }

        let per_class: Vec<ClassStats> = (0..n_classes)
            .map(|c| {
                let ranking: Vec<f64> = predictions.iter().map(|p| p.ranking[c]).collect();
                let positive: Vec<bool> = actual.iter().map(|&a| a == c).collect();
                ClassStats::from_counts(&matrix.binary(c), auc_mann_whitney(&ranking, &positive))
            })
            .collect();
        let weights: Vec<f64> = (0..n_classes).map(|c| matrix.row_sum(c) as f64).collect();

        let (mut abs, mut sq) = (0.0, 0.0);
        for (&a, p) in actual.iter().zip(predictions) {
            let total: f64 = p.scores.iter().sum();
            for (c, s) in p.scores.iter().enumerate() {
                let s = ratio(*s, total);
                let r = s - if c == a { 1.0 } else { 0.0 };
                abs += r.abs();
                sq += r * r;
            }
        }
        let cells = (actual.len() * n_classes) as f64;

        Ok(EvaluationReport {
            classifier: classifier.to_string(),
            weighted_average: ClassStats::weighted(&per_class, &weights),
            per_class,
            accuracy: matrix.accuracy(),
            kappa: matrix.kappa(),
            mae: abs / cells,
            rmse: (sq / cells).sqrt(),
            ci95: wilson_interval(matrix.trace(), matrix.total(), Z_95),
            matrix,
        })
    }

    /// Aligned text tables: summary, per-class statistics, confusion matrix.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Classifier                  {}", self.classifier);
        let _ = writeln!(out, "Test samples                {}", self.matrix.total());
        let _ = writeln!(out, "Success rate (%)            {:.2}", 100.0 * self.accuracy);
        let _ = writeln!(
            out,
            "95% Wilson interval (%)     {:.2} - {:.2}",
            100.0 * self.ci95.0,
            100.0 * self.ci95.1
        );
        let _ = writeln!(out, "Kappa statistic             {:.4}", self.kappa);
        let _ = writeln!(out, "Mean absolute error         {:.4}", self.mae);
        let _ = writeln!(out, "Root mean squared error     {:.4}", self.rmse);
        out.push('\n');

        let width = self.matrix.labels.iter().map(String::len).max().unwrap_or(0).max(16);
        let _ = writeln!(
            out,
            "{:<width$}  TP rate  FP rate  Precision  Recall  F-measure    MCC    AUC",
            "Script"
        );
        let row = |out: &mut String, name: &str, s: &ClassStats| {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7.3}  {:>7.3}  {:>9.3}  {:>6.3}  {:>9.3}  {:>5.3}  {:>5.3}",
                name, s.tpr, s.fpr, s.precision, s.recall, s.f_measure, s.mcc, s.auc
            );
        };
        for (name, s) in self.matrix.labels.iter().zip(&self.per_class) {
            row(&mut out, name, s);
        }
        row(&mut out, "Weighted Average", &self.weighted_average);
        out.push('\n');

        let _ = writeln!(out, "Confusion matrix (rows = actual, columns = predicted)");
        let cell = self
            .matrix
            .labels
            .iter()
            .map(|l| l.len().min(9))
            .max()
            .unwrap_or(1)
            .max(5);
        let _ = write!(out, "{:<width$}", "");
        for l in &self.matrix.labels {
            let _ = write!(out, " {:>cell$}", &l[..l.len().min(cell)]);
        }
        out.push('\n');
        for (l, r) in self.matrix.labels.iter().zip(&self.matrix.counts) {
            let _ = write!(out, "{l:<width$}");
            for v in r {
                let _ = write!(out, " {v:>cell$}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn actual_classes(labels: &LabelSet, data: &[FeatureVector]) -> Result<Vec<usize>> {
    data.iter()
        .enumerate()
        .map(|(i, fv)| {
            let label = fv
                .label
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter(format!("test sample {i} has no label")))?;
            labels
                .index_of(label.as_str())
                .ok_or_else(|| Error::UnknownLabel(label.to_string()))
        })
        .collect()
}

/// Predicts every labelled test vector and reports on the result.
pub fn evaluate(model: &TrainedModel, test: &[FeatureVector]) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let actual = actual_classes(model.labels(), test)?;
    let predictions = test.iter().map(|fv| model.predict(fv)).collect::<Result<Vec<_>>>()?;
    EvaluationReport::from_predictions(model.kind_name(), model.labels(), &actual, &predictions)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValidation {
    /// Fold index of every input sample.
    pub assignment: Vec<usize>,
    pub folds: Vec<EvaluationReport>,
    /// Report over the out-of-fold prediction of every sample.
    pub pooled: EvaluationReport,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Stratified fold assignment: each class is shuffled, classes are laid end
/// to end in label order, and folds are dealt round-robin.
///
/// Classes with fewer samples than `folds` are rejected, except for
/// leave-one-out (`folds == classes.len()`).
pub fn stratified_folds(classes: &[usize], names: &[String], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    if folds > classes.len() {
        return Err(Error::InvalidParameter(format!(
            "{folds} folds for {} samples",
            classes.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; classes.len()];
    let mut position = 0;
    for (c, name) in names.iter().enumerate() {
        let mut members: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] == c).collect();
        if members.len() < folds && folds != classes.len() {
            return Err(Error::ClassTooSmall {
                label: name.clone(),
                count: members.len(),
                required: folds,
            });
        }
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = position % folds;
            position += 1;
        }
    }
    Ok(assignment)
}

/// Stratified k-fold cross-validation; deterministic for a given seed.
pub fn kfold_cross_validate(
    spec: &ModelSpec,
    data: &[FeatureVector],
    labels: &LabelSet,
    folds: usize,
    seed: u64,
) -> Result<CrossValidation> {
    // restrict to the labels actually present so every class has samples
    let present: Vec<usize> = actual_classes(labels, data)?;
    let used = LabelSet::new(
        labels
            .names()
            .iter()
            .enumerate()
            .filter(|(i, _)| present.contains(i))
            .map(|(_, n)| n.clone()),
    )
    .map_err(|_| Error::EmptyDataset)?;
    let classes = actual_classes(&used, data)?;
    let assignment = stratified_folds(&classes, used.names(), folds, seed)?;

    let mut reports = Vec::with_capacity(folds);
    let mut pooled: Vec<Option<Prediction>> = vec![None; data.len()];
    for f in 0..folds {
        let train: Vec<FeatureVector> = (0..data.len())
            .filter(|&i| assignment[i] != f)
            .map(|i| data[i].clone())
            .collect();
        let test_idx: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] == f).collect();
        let model = TrainedModel::fit(spec, &train, &used)?;
        let mut actual = Vec::with_capacity(test_idx.len());
        let mut preds = Vec::with_capacity(test_idx.len());
        for &i in &test_idx {
            let p = widen(model.predict(&data[i])?, model.labels(), &used);
            actual.push(classes[i]);
            pooled[i] = Some(p.clone());
            preds.push(p);
        }
        reports.push(EvaluationReport::from_predictions(spec.name(), &used, &actual, &preds)?);
    }

    let pooled: Vec<Prediction> = pooled
        .into_iter()
        .map(|p| p.expect("every sample is tested once"))
        .collect();
    let pooled = EvaluationReport::from_predictions(spec.name(), &used, &classes, &pooled)?;
    let accs: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let std = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64).sqrt();
    Ok(CrossValidation {
        assignment,
        folds: reports,
        pooled,
        mean_accuracy: mean,
        std_accuracy: std,
    })
}

/// Re-indexes a prediction from a fold model's (possibly smaller) label set
/// into `full`; absent classes score 0.
fn widen(p: Prediction, model_labels: &LabelSet, full: &LabelSet) -> Prediction {
    if model_labels == full {
        return p;
    }
    let mut scores = vec![0.0; full.len()];
    let mut ranking = vec![f64::NEG_INFINITY; full.len()];
    for (i, name) in model_labels.names().iter().enumerate() {
        let j = full.index_of(name).expect("fold labels are a subset");
        scores[j] = p.scores[i];
        ranking[j] = p.ranking[i];
    }
    let class = full.index_of(p.label.as_str()).expect("fold labels are a subset");
    Prediction {
        class,
        label: p.label,
        scores,
        ranking,
    }
}
