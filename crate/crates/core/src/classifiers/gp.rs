use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, TrainSet};
use crate::error::{Error, Result};

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn rbf(a: ArrayView1<f64>, b: ArrayView1<f64>, length_scale: f64) -> f64 {
    let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (2.0 * length_scale * length_scale)).exp()
}

/// Binary Laplace-approximated GP classifier with a fixed RBF kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpBinary {
    /// `t − π̂` at the posterior mode.
    pub grad: Vec<f64>,
    pub sqrt_w: Vec<f64>,
    /// Lower Cholesky factor of `I + W½ K W½`, row-major.
    pub chol: Vec<f64>,
}

impl GpBinary {
    fn fit(k: &DMatrix<f64>, t: &[f64]) -> Result<Self> {
        let n = t.len();
        let mut f = DVector::<f64>::zeros(n);
        let mut prev = f64::NEG_INFINITY;
        let tv = DVector::from_column_slice(t);
        let factor = |f: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>, DMatrix<f64>)> {
            let pi = f.map(sigmoid);
            let w = pi.map(|p| p * (1.0 - p));
            let sw = w.map(f64::sqrt);
            let mut b = k.component_mul(&(&sw * sw.transpose()));
            for i in 0..n {
                b[(i, i)] += 1.0;
            }
            let l = b
                .cholesky()
                .ok_or_else(|| Error::invalid("GP Newton system is not positive definite"))?
                .l();
            Ok((pi, sw, l))
        };
        for _ in 0..100 {
            let (pi, sw, l) = factor(&f)?;
            let w = sw.map(|s| s * s);
            let b = w.component_mul(&f) + (&tv - &pi);
            let kb = k * &b;
            let z = l.solve_lower_triangular(&sw.component_mul(&kb)).unwrap();
            let z = l.transpose().solve_upper_triangular(&z).unwrap();
            let a = b - sw.component_mul(&z);
            f = k * &a;
            let loglik: f64 = f
                .iter()
                .zip(t)
                .map(|(&fi, &ti)| ti * fi - (fi.max(0.0) + (-fi.abs()).exp().ln_1p()))
                .sum();
            let obj = -0.5 * a.dot(&f) + loglik;
            if (obj - prev).abs() < 1e-10 {
                break;
            }
            prev = obj;
        }
        let (pi, sw, l) = factor(&f)?;
        Ok(Self {
            grad: (&tv - &pi).iter().copied().collect(),
            sqrt_w: sw.iter().copied().collect(),
            chol: l.transpose().as_slice().to_vec(),
        })
    }

    /// Probability of the positive class, with the probit-style variance
    /// correction of the latent predictive.
    fn prob(&self, l: &DMatrix<f64>, kstar: &DVector<f64>) -> f64 {
        let mean: f64 = kstar.iter().zip(&self.grad).map(|(a, b)| a * b).sum();
        let v = l
            .solve_lower_triangular(&DVector::from_fn(kstar.len(), |i, _| self.sqrt_w[i] * kstar[i]))
            .unwrap();
        let var = (1.0 - v.norm_squared()).max(0.0);
        sigmoid(mean / (1.0 + std::f64::consts::PI * var / 8.0).sqrt())
    }
}

/// One-vs-rest for more than two classes; a single machine for two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub length_scale: f64,
    pub x: Array2<f64>,
    pub n_classes: usize,
    pub machines: Vec<GpBinary>,
}

impl GpModel {
    pub(crate) fn fit(data: &TrainSet, length_scale: f64, max_samples: usize, seed: u64) -> Result<Self> {
        if !(length_scale > 0.0) || max_samples < 2 {
            return Err(Error::invalid("GP needs a positive length scale and max_samples >= 2"));
        }
        let n = data.y.len();
        let rows: Vec<usize> = if n > max_samples {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut r = sample(&mut rng, n, max_samples).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let x = data.x.select(Axis(0), &rows);
        let m = rows.len();
        let k = DMatrix::from_fn(m, m, |i, j| rbf(x.row(i), x.row(j), length_scale));
        let targets: Vec<usize> = if data.n_classes == 2 { vec![1] } else { (0..data.n_classes).collect() };
        let machines = targets
            .iter()
            .map(|&c| {
                let t: Vec<f64> = rows.iter().map(|&i| (data.y[i] == c) as u8 as f64).collect();
                GpBinary::fit(&k, &t)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            length_scale,
            x,
            n_classes: data.n_classes,
            machines,
        })
    }

    pub(crate) fn predict(&self, x: &ArrayView2<f64>) -> Vec<usize> {
        let m = self.x.nrows();
        let ls: Vec<DMatrix<f64>> = self
            .machines
            .iter()
            .map(|g| DMatrix::from_row_slice(m, m, &g.chol))
            .collect();
        x.rows()
            .into_iter()
            .map(|q| {
                let kstar = DVector::from_fn(m, |i, _| rbf(self.x.row(i), q, self.length_scale));
                let probs: Vec<f64> =
                    self.machines.iter().zip(&ls).map(|(g, l)| g.prob(l, &kstar)).collect();
                if self.n_classes == 2 {
                    (probs[0] > 0.5) as usize
                } else {
                    argmax(&probs)
                }
            })
            .collect()
    }
}
