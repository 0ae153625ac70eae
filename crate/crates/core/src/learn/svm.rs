//! Soft-margin SVM trained by sequential minimal optimization, combined
//! one-vs-one for multi-class problems.
//!
//! The binary solver minimizes `1/2 a'Qa - e'a` subject to `0 <= a_i <= C`
//! and `y'a = 0`, with `Q_ij = y_i y_j K(x_i, x_j)`. Each iteration picks
//! the maximal violating index `i` and a partner `j` by the second-order
//! gain rule, solves the two-variable subproblem analytically, and clips it
//! back into the box. Iteration stops once the KKT gap
//! `max_{I_up} -y G - min_{I_low} -y G` drops below `tol`.

use serde::{Deserialize, Serialize};

/// Kernel functions on standardized feature rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: Kernel,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 10.0,
            kernel: Kernel::Rbf {
                gamma: 1.0 / crate::featureset::FEATURE_COUNT as f64,
            },
            tol: 1e-3,
            max_iter: 100_000,
        }
    }
}

/// Result of one binary SMO run.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Offset: the decision value is `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

const TAU: f64 = 1e-12;

/// Binary SMO over a row-major `n x n` kernel matrix and labels `y_i = +-1`.
pub fn solve_smo(gram: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> SmoSolution {
    let n = y.len();
    debug_assert_eq!(gram.len(), n * n);
    let k = |i: usize, j: usize| gram[i * n + j];
    let mut alpha = vec![0.0; n];
    // gradient of the dual objective: Q a - e
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > g_max {
                g_max = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };

        let mut g_max2 = f64::NEG_INFINITY;
        let mut best_obj = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let yg = y[t] * grad[t];
            g_max2 = g_max2.max(yg);
            let grad_diff = g_max + yg;
            if grad_diff > 0.0 {
                let mut quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -grad_diff * grad_diff / quad;
                if obj < best_obj {
                    best_obj = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel.filter(|_| g_max + g_max2 >= tol) else {
            converged = true;
            break;
        };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k(i, j);
        if y[i] != y[j] {
            let quad = (k(i, i) + k(j, j) + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k(i, i) + k(j, j) - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (d_i, d_j) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * d_i + y[j] * k(t, j) * d_j);
        }
    }

    SmoSolution {
        rho: offset(&alpha, &grad, y, c),
        alpha,
        iterations,
        converged,
    }
}

fn offset(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut upper, mut lower) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (upper + lower) / 2.0
    }
}

/// One pairwise classifier: positive class votes when the decision is > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSvm {
    pub positive: usize,
    pub negative: usize,
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
}

impl PairwiseSvm {
    pub fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * kernel.eval(sv, x))
            .sum::<f64>()
            - self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    pub pairs: Vec<PairwiseSvm>,
}

impl SvmModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[usize], n_classes: usize, params: SvmParams) -> Self {
        let n = rows.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = params.kernel.eval(&rows[i], &rows[j]);
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }

        let mut pairs = Vec::new();
        for a in 0..n_classes {
            for b in a + 1..n_classes {
                let members: Vec<usize> = (0..n).filter(|&i| targets[i] == a || targets[i] == b).collect();
                let m = members.len();
                let y: Vec<f64> = members
                    .iter()
                    .map(|&i| if targets[i] == a { 1.0 } else { -1.0 })
                    .collect();
                let mut local = vec![0.0; m * m];
                for (p, &i) in members.iter().enumerate() {
                    for (q, &j) in members.iter().enumerate() {
                        local[p * m + q] = gram[i * n + j];
                    }
                }
                let sol = solve_smo(&local, &y, params.c, params.tol, params.max_iter);
                if !sol.converged {
                    log::warn!(
                        "SMO for classes {a}/{b} stopped after {} iterations without reaching tol {}",
                        sol.iterations,
                        params.tol
                    );
                }
                let (mut support, mut coef) = (Vec::new(), Vec::new());
                for (p, &i) in members.iter().enumerate() {
                    if sol.alpha[p] > 0.0 {
                        support.push(rows[i].clone());
                        coef.push(sol.alpha[p] * y[p]);
                    }
                }
                pairs.push(PairwiseSvm {
                    positive: a,
                    negative: b,
                    support,
                    coef,
                    rho: sol.rho,
                });
            }
        }
        SvmModel { params, pairs }
    }

    /// Per-class votes and summed signed margins.
    pub fn votes(&self, x: &[f64], n_classes: usize) -> (Vec<f64>, Vec<f64>) {
        let mut votes = vec![0.0; n_classes];
        let mut margins = vec![0.0; n_classes];
        for pair in &self.pairs {
            let d = pair.decision(&self.params.kernel, x);
            if d > 0.0 {
                votes[pair.positive] += 1.0;
            } else {
                votes[pair.negative] += 1.0;
            }
            margins[pair.positive] += d;
            margins[pair.negative] -= d;
        }
        (votes, margins)
    }
}
