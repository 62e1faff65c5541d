use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{argmax, TrainSet};
use crate::error::{Error, Result};

fn class_totals(data: &TrainSet) -> Vec<f64> {
    let mut t = vec![0.0; data.n_classes];
    for (&y, &w) in data.y.iter().zip(&data.w) {
        t[y] += w;
    }
    t
}

/// Gaussian naive Bayes on weighted per-class means and variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_prior: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
}

impl GaussianNb {
    /// Adds `var_smoothing · max_j var(X_j)` to every variance.
    pub(crate) fn fit(data: &TrainSet, var_smoothing: f64) -> Result<Self> {
        if !(var_smoothing >= 0.0) {
            return Err(Error::invalid("var_smoothing must be non-negative"));
        }
        let p = data.x.ncols();
        let n = data.x.nrows() as f64;
        let mut max_var = 0.0f64;
        for col in data.x.columns() {
            let m = col.sum() / n;
            max_var = max_var.max(col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n);
        }
        let eps = (var_smoothing * max_var).max(f64::MIN_POSITIVE);
        let totals = class_totals(data);
        let grand: f64 = totals.iter().sum();
        let mut mean = vec![vec![0.0; p]; data.n_classes];
        let mut var = vec![vec![0.0; p]; data.n_classes];
        for (i, row) in data.x.rows().into_iter().enumerate() {
            let k = data.y[i];
            for j in 0..p {
                mean[k][j] += data.w[i] * row[j];
            }
        }
        for k in 0..data.n_classes {
            mean[k].iter_mut().for_each(|m| *m /= totals[k]);
        }
        for (i, row) in data.x.rows().into_iter().enumerate() {
            let k = data.y[i];
            for j in 0..p {
                var[k][j] += data.w[i] * (row[j] - mean[k][j]).powi(2);
            }
        }
        for k in 0..data.n_classes {
            var[k].iter_mut().for_each(|v| *v = *v / totals[k] + eps);
        }
        Ok(Self {
            log_prior: totals.iter().map(|t| (t / grand).ln()).collect(),
            mean,
            var,
        })
    }

    pub(crate) fn predict(&self, x: &ArrayView2<f64>) -> Vec<usize> {
        x.rows()
            .into_iter()
            .map(|row| {
                let scores: Vec<f64> = (0..self.log_prior.len())
                    .map(|k| {
                        let mut s = self.log_prior[k];
                        for (j, &v) in row.iter().enumerate() {
                            let var = self.var[k][j];
                            s -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln()
                                + (v - self.mean[k][j]).powi(2) / var);
                        }
                        s
                    })
                    .collect();
                argmax(&scores)
            })
            .collect()
    }
}

/// Bernoulli naive Bayes on features binarised at a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliNb {
    pub binarize: f64,
    pub log_prior: Vec<f64>,
    pub log_p: Vec<Vec<f64>>,
    pub log_not_p: Vec<Vec<f64>>,
}

impl BernoulliNb {
    pub(crate) fn fit(data: &TrainSet, binarize: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::invalid("smoothing alpha must be positive"));
        }
        let p = data.x.ncols();
        let totals = class_totals(data);
        let grand: f64 = totals.iter().sum();
        let mut on = vec![vec![0.0; p]; data.n_classes];
        for (i, row) in data.x.rows().into_iter().enumerate() {
            for j in 0..p {
                if row[j] > binarize {
                    on[data.y[i]][j] += data.w[i];
                }
            }
        }
        let mut log_p = on.clone();
        let mut log_not_p = on.clone();
        for k in 0..data.n_classes {
            for j in 0..p {
                let prob = (on[k][j] + alpha) / (totals[k] + 2.0 * alpha);
                log_p[k][j] = prob.ln();
                log_not_p[k][j] = (1.0 - prob).ln();
            }
        }
        Ok(Self {
            binarize,
            log_prior: totals.iter().map(|t| (t / grand).ln()).collect(),
            log_p,
            log_not_p,
        })
    }

    pub(crate) fn predict(&self, x: &ArrayView2<f64>) -> Vec<usize> {
        x.rows()
            .into_iter()
            .map(|row| {
                let scores: Vec<f64> = (0..self.log_prior.len())
                    .map(|k| {
                        let mut s = self.log_prior[k];
                        for (j, &v) in row.iter().enumerate() {
                            s += if v > self.binarize { self.log_p[k][j] } else { self.log_not_p[k][j] };
                        }
                        s
                    })
                    .collect();
                argmax(&scores)
            })
            .collect()
    }
}
