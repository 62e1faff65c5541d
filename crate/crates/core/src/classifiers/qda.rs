use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{argmax, TrainSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaClass {
    pub log_prior: f64,
    pub mean: Vec<f64>,
    /// Lower Cholesky factor of the regularised covariance, row-major.
    pub chol: Vec<f64>,
    pub log_det: f64,
}

/// Quadratic discriminant analysis with a ridge on each class covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qda {
    pub p: usize,
    pub classes: Vec<QdaClass>,
}

impl Qda {
    pub(crate) fn fit(data: &TrainSet, reg: f64) -> Result<Self> {
        if !(reg > 0.0) {
            return Err(Error::invalid("covariance regularisation must be positive"));
        }
        let p = data.x.ncols();
        let grand: f64 = data.w.iter().sum();
        let mut classes = Vec::with_capacity(data.n_classes);
        for k in 0..data.n_classes {
            let rows = data.class_rows(k);
            let wk: f64 = rows.iter().map(|&i| data.w[i]).sum();
            let mut mean = vec![0.0; p];
            for &i in &rows {
                for j in 0..p {
                    mean[j] += data.w[i] * data.x[[i, j]];
                }
            }
            mean.iter_mut().for_each(|m| *m /= wk);
            let mut cov = DMatrix::<f64>::zeros(p, p);
            for &i in &rows {
                let d = DVector::from_fn(p, |j, _| data.x[[i, j]] - mean[j]);
                cov += data.w[i] * &d * d.transpose();
            }
            cov /= wk;
            for j in 0..p {
                cov[(j, j)] += reg;
            }
            let chol = cov
                .cholesky()
                .ok_or_else(|| Error::invalid("class covariance is not positive definite"))?;
            let l = chol.l();
            let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            classes.push(QdaClass {
                log_prior: (wk / grand).ln(),
                mean,
                chol: l.transpose().as_slice().to_vec(),
                log_det,
            });
        }
        Ok(Self { p, classes })
    }

    pub(crate) fn predict(&self, x: &ArrayView2<f64>) -> Vec<usize> {
        let ls: Vec<DMatrix<f64>> = self
            .classes
            .iter()
            .map(|c| DMatrix::from_row_slice(self.p, self.p, &c.chol))
            .collect();
        x.rows()
            .into_iter()
            .map(|row| {
                let scores: Vec<f64> = self
                    .classes
                    .iter()
                    .zip(&ls)
                    .map(|(c, l)| {
                        let d = DVector::from_fn(self.p, |j, _| row[j] - c.mean[j]);
                        let z = l.solve_lower_triangular(&d).expect("nonsingular factor");
                        c.log_prior - 0.5 * (c.log_det + z.norm_squared())
                    })
                    .collect();
                argmax(&scores)
            })
            .collect()
    }
}
