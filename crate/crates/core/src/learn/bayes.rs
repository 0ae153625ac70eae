use serde::{Deserialize, Serialize};

pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes: independent per-feature normals per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub log_priors: Vec<f64>,
}

impl NaiveBayesModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[usize], n_classes: usize) -> Self {
        let dim = rows[0].len();
        let mut counts = vec![0usize; n_classes];
        let mut means = vec![vec![0.0; dim]; n_classes];
        for (row, &t) in rows.iter().zip(targets) {
            counts[t] += 1;
            for (m, v) in means[t].iter_mut().zip(row) {
                *m += v;
            }
        }
        for (m, &n) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= n as f64);
        }
        let mut variances = vec![vec![0.0; dim]; n_classes];
        for (row, &t) in rows.iter().zip(targets) {
            for ((s, v), m) in variances[t].iter_mut().zip(row).zip(&means[t]) {
                *s += (v - m) * (v - m);
            }
        }
        for (s, &n) in variances.iter_mut().zip(&counts) {
            s.iter_mut().for_each(|v| *v = (*v / n as f64).max(VARIANCE_FLOOR));
        }
        let total = rows.len() as f64;
        let log_priors = counts.iter().map(|&n| (n as f64 / total).ln()).collect();
        NaiveBayesModel {
            means,
            variances,
            log_priors,
        }
    }

    /// Class posteriors, normalized with log-sum-exp.
    pub fn posteriors(&self, x: &[f64]) -> Vec<f64> {
        let log_joint: Vec<f64> = (0..self.log_priors.len())
            .map(|c| {
                self.log_priors[c]
                    + x.iter()
                        .zip(&self.means[c])
                        .zip(&self.variances[c])
                        .map(|((v, m), var)| {
                            -0.5 * (std::f64::consts::TAU * var).ln() - (v - m) * (v - m) / (2.0 * var)
                        })
                        .sum::<f64>()
            })
            .collect();
        let max = log_joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = log_joint.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = exp.iter().sum();
        exp.iter().map(|e| e / sum).collect()
    }
}
