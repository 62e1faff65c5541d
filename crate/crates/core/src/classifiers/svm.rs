use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::TrainSet;
use crate::error::{Error, Result};

const TOL: f64 = 1e-5;
const MAX_ITER: usize = 10_000;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Poly { degree: u32, gamma: f64, coef0: f64 },
    Rbf { gamma: f64 },
    Sigmoid { gamma: f64, coef0: f64 },
}

impl Kernel {
    pub fn eval(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match *self {
            Kernel::Linear => a.dot(&b),
            Kernel::Poly { degree, gamma, coef0 } => (gamma * a.dot(&b) + coef0).powi(degree as i32),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Sigmoid { gamma, coef0 } => (gamma * a.dot(&b) + coef0).tanh(),
        }
    }
}

/// `1 / (p · var(X))` over all entries, or 1 for constant data.
pub(crate) fn scale_gamma(x: &ArrayView2<f64>) -> f64 {
    let n = x.len() as f64;
    if n == 0.0 {
        return 1.0;
    }
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (x.ncols() as f64 * var)
    } else {
        1.0
    }
}

/// One binary machine: `f(x) = Σ coef_i K(sv_i, x) − rho`, positive side first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub positive: usize,
    pub negative: usize,
    pub support: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinarySvm {
    pub fn decision(&self, kernel: &Kernel, x: ArrayView1<f64>) -> f64 {
        let mut s = 0.0;
        for (sv, c) in self.support.iter().zip(&self.coef) {
            s += c * kernel.eval(ArrayView1::from(&sv[..]), x);
        }
        s - self.rho
    }
}

/// Dual SMO solver with second-order working-set selection and per-sample
/// box constraints `0 ≤ α_i ≤ c_i`.
pub(crate) struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn smo(k: &Array2<f64>, y: &[f64], c: &[f64]) -> SmoSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let upper = |a: f64, ci: f64| a >= ci;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITER {
        // Select i maximising −y G over I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !upper(alpha[t], c[t]) } else { !lower(alpha[t]) };
            if in_up && -y[t] * g[t] >= gmax {
                gmax = -y[t] * g[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t], c[t]) };
            if !in_low {
                continue;
            }
            let yg = y[t] * g[t];
            gmax2 = gmax2.max(yg);
            let grad_diff = gmax + yg;
            if grad_diff > 0.0 {
                let mut quad = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < TOL || j_sel.is_none() {
            converged = true;
            break;
        }
        let j = j_sel.unwrap();
        iterations += 1;

        let (ci, cj) = (c[i], c[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * k[[i, j]];
        if y[i] != y[j] {
            let mut quad = k[[i, i]] + k[[j, j]] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
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
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = k[[i, i]] + k[[j, j]] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            g[t] += y[t] * (y[i] * k[[t, i]] * di + y[j] * k[[t, j]] * dj);
        }
    }

    // Bias: average of y G over free vectors, else the midpoint of the bounds.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * g[t];
        if upper(alpha[t], c[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    SmoSolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

/// One-vs-one support vector machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub n_classes: usize,
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    pub(crate) fn fit(data: &TrainSet, kernel: Kernel, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("SVM penalty must be positive, got {c}")));
        }
        let mut machines = Vec::new();
        for a in 0..data.n_classes {
            for b in a + 1..data.n_classes {
                let rows: Vec<usize> = (0..data.y.len())
                    .filter(|&i| data.y[i] == a || data.y[i] == b)
                    .collect();
                let m = rows.len();
                let mut km = Array2::zeros((m, m));
                for p in 0..m {
                    for q in p..m {
                        let v = kernel.eval(data.x.row(rows[p]), data.x.row(rows[q]));
                        km[[p, q]] = v;
                        km[[q, p]] = v;
                    }
                }
                let y: Vec<f64> = rows.iter().map(|&i| if data.y[i] == a { 1.0 } else { -1.0 }).collect();
                let cs: Vec<f64> = rows.iter().map(|&i| c * data.w[i]).collect();
                let sol = smo(&km, &y, &cs);
                let mut support = Vec::new();
                let mut coef = Vec::new();
                for (p, &al) in sol.alpha.iter().enumerate() {
                    if al > 0.0 {
                        support.push(data.x.row(rows[p]).to_vec());
                        coef.push(al * y[p]);
                    }
                }
                machines.push(BinarySvm {
                    positive: a,
                    negative: b,
                    support,
                    coef,
                    rho: sol.rho,
                    iterations: sol.iterations,
                    converged: sol.converged,
                });
            }
        }
        Ok(Self {
            kernel,
            n_classes: data.n_classes,
            machines,
        })
    }

    pub fn decision_values(&self, x: ArrayView1<f64>) -> Vec<f64> {
        self.machines.iter().map(|m| m.decision(&self.kernel, x)).collect()
    }

    pub(crate) fn predict(&self, x: &ArrayView2<f64>) -> Vec<usize> {
        x.rows()
            .into_iter()
            .map(|row| {
                let mut votes = vec![0usize; self.n_classes];
                for m in &self.machines {
                    if m.decision(&self.kernel, row) > 0.0 {
                        votes[m.positive] += 1;
                    } else {
                        votes[m.negative] += 1;
                    }
                }
                let mut best = 0;
                for k in 1..votes.len() {
                    if votes[k] > votes[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}
