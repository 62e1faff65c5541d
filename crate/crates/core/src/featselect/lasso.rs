use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::table::FeatureMatrix;

/// Coefficients with a smaller magnitude count as zero.
pub const NONZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub n_alphas: usize,
    /// Ratio between the smallest and the largest alpha.
    pub eps: f64,
    pub max_sweeps: usize,
    /// Stop once no coordinate moves by more than this in a sweep.
    pub tol: f64,
    /// Required KKT residual before a fit is declared converged.
    pub kkt_tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            n_alphas: 200,
            eps: 0.01,
            max_sweeps: 1000,
            tol: 1e-6,
            kkt_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub w: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective at the start and after every sweep.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub alphas: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    pub n: usize,
    pub converged: Vec<bool>,
    pub objective_traces: Vec<Vec<f64>>,
    /// Column means and target mean removed before fitting.
    pub x_mean: Vec<f64>,
    pub y_mean: f64,
}

fn check_finite(x: &Array2<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("lasso inputs must be finite"));
    }
    Ok(())
}

/// `‖y − Xw‖² / (2n) + α‖w‖₁`.
pub fn lasso_objective(x: &Array2<f64>, y: &[f64], w: &[f64], alpha: f64) -> f64 {
    let r = Array1::from(y.to_vec()) - x.dot(&ArrayView1::from(w));
    r.dot(&r) / (2.0 * y.len() as f64) + alpha * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest deviation from the lasso optimality conditions.
pub fn kkt_residual(x: &Array2<f64>, y: &[f64], w: &[f64], alpha: f64) -> f64 {
    let n = y.len() as f64;
    let r = Array1::from(y.to_vec()) - x.dot(&ArrayView1::from(w));
    let g = x.t().dot(&r) / n;
    g.iter()
        .zip(w)
        .map(|(&gj, &wj)| {
            if wj != 0.0 {
                (gj - alpha * wj.signum()).abs()
            } else {
                (gj.abs() - alpha).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// `max_j |X_jᵀ y| / n`, the smallest alpha giving an all-zero solution.
pub fn alpha_max(x: &Array2<f64>, y: &[f64]) -> f64 {
    let g = x.t().dot(&ArrayView1::from(y));
    g.iter().map(|v| v.abs()).fold(0.0, f64::max) / y.len() as f64
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Coordinate descent in covariance form: `G = XᵀX / n` and `c = Xᵀy / n`.
/// Gram columns are computed the first time a coordinate becomes nonzero and
/// cached, so one instance serves a whole warm-started path.
struct Solver<'a> {
    x: &'a Array2<f64>,
    y: &'a [f64],
    cols: Vec<Vec<f64>>,
    diag: Vec<f64>,
    c: Vec<f64>,
    half_yy: f64,
    gram: Vec<Option<Vec<f64>>>,
}

impl<'a> Solver<'a> {
    fn new(x: &'a Array2<f64>, y: &'a [f64]) -> Self {
        let nf = y.len() as f64;
        let cols: Vec<Vec<f64>> = x.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
        Self {
            diag: cols.iter().map(|c| dot(c, c) / nf).collect(),
            c: cols.iter().map(|c| dot(c, y) / nf).collect(),
            half_yy: dot(y, y) / (2.0 * nf),
            gram: vec![None; cols.len()],
            cols,
            x,
            y,
        }
    }

    fn ensure_gram(&mut self, j: usize) {
        if self.gram[j].is_none() {
            let nf = self.y.len() as f64;
            let cj = &self.cols[j];
            let col = self
                .cols
                .iter()
                .map(|ck| ck.iter().zip(cj).map(|(a, b)| a * b).sum::<f64>() / nf)
                .collect();
            self.gram[j] = Some(col);
        }
    }

    /// `q = G w`, from scratch.
    fn gram_product(&mut self, w: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; w.len()];
        for k in 0..w.len() {
            if w[k] != 0.0 {
                self.ensure_gram(k);
                let g = self.gram[k].as_ref().unwrap();
                for (qi, gi) in q.iter_mut().zip(g) {
                    *qi += w[k] * gi;
                }
            }
        }
        q
    }

    fn objective(&self, w: &[f64], q: &[f64], alpha: f64) -> f64 {
        let (mut fit, mut l1) = (0.0, 0.0);
        for j in 0..w.len() {
            if w[j] != 0.0 {
                fit += w[j] * (0.5 * q[j] - self.c[j]);
                l1 += w[j].abs();
            }
        }
        self.half_yy + fit + alpha * l1
    }

    /// One pass over `idx`; `q` is kept current on `keep` (all coordinates
    /// when `None`). Returns the largest coefficient change.
    fn sweep(&mut self, idx: &[usize], keep: Option<&[usize]>, w: &mut [f64], q: &mut [f64], alpha: f64) -> f64 {
        let mut max_change = 0.0f64;
        for &j in idx {
            let d = self.diag[j];
            if d == 0.0 {
                w[j] = 0.0;
                continue;
            }
            let rho = self.c[j] - q[j] + d * w[j];
            let new = soft_threshold(rho, alpha) / d;
            let delta = new - w[j];
            if delta == 0.0 {
                continue;
            }
            self.ensure_gram(j);
            let g = self.gram[j].as_ref().unwrap();
            match keep {
                None => q.iter_mut().zip(g).for_each(|(qi, gi)| *qi += delta * gi),
                Some(keep) => keep.iter().for_each(|&k| q[k] += delta * g[k]),
            }
            w[j] = new;
            max_change = max_change.max(delta.abs());
        }
        max_change
    }

    /// Full sweeps alternate with sweeps over the nonzero coordinates only;
    /// convergence is only declared after a full sweep, and needs the exact
    /// KKT residual on the data as well.
    fn solve(&mut self, alpha: f64, mut w: Vec<f64>, opts: &LassoOptions) -> LassoFit {
        let p = w.len();
        let all: Vec<usize> = (0..p).collect();
        let mut q = self.gram_product(&w);
        let mut trace = vec![self.objective(&w, &q, alpha)];
        let mut converged = false;
        let mut sweeps = 0;
        'outer: while sweeps < opts.max_sweeps {
            sweeps += 1;
            let max_change = self.sweep(&all, None, &mut w, &mut q, alpha);
            trace.push(self.objective(&w, &q, alpha));
            if max_change < opts.tol && kkt_residual(self.x, self.y, &w, alpha) < opts.kkt_tol {
                converged = true;
                break;
            }
            let active: Vec<usize> = (0..p).filter(|&j| w[j] != 0.0).collect();
            while !active.is_empty() {
                if sweeps >= opts.max_sweeps {
                    break 'outer;
                }
                sweeps += 1;
                let change = self.sweep(&active, Some(&active), &mut w, &mut q, alpha);
                trace.push(self.objective(&w, &q, alpha));
                if change < opts.tol {
                    break;
                }
            }
            q = self.gram_product(&w);
        }
        LassoFit {
            w,
            sweeps,
            converged,
            objective_trace: trace,
        }
    }
}

/// Cyclic coordinate descent at a single alpha, warm-started from `w0`.
/// No centering is applied.
pub fn lasso_fit(
    x: &Array2<f64>,
    y: &[f64],
    alpha: f64,
    w0: Option<&[f64]>,
    opts: &LassoOptions,
) -> Result<LassoFit> {
    check_finite(x, y)?;
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha must be non-negative"));
    }
    let (n, p) = x.dim();
    if n == 0 {
        return Err(Error::invalid("lasso needs at least one sample"));
    }
    let w = w0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p]);
    if w.len() != p {
        return Err(Error::invalid("warm start has the wrong length"));
    }
    Ok(Solver::new(x, y).solve(alpha, w, opts))
}

pub fn lasso_path(x: &Array2<f64>, y: &[f64]) -> Result<LassoPath> {
    lasso_path_with(x, y, &LassoOptions::default())
}

/// Centers `x` and `y`, then solves along `n_alphas` log-spaced alphas from
/// `alpha_max` down to `eps · alpha_max` with warm starts.
pub fn lasso_path_with(x: &Array2<f64>, y: &[f64], opts: &LassoOptions) -> Result<LassoPath> {
    check_finite(x, y)?;
    let n = y.len();
    if n < 2 {
        return Err(Error::invalid("lasso path needs at least 2 samples"));
    }
    if opts.n_alphas < 2 || !(opts.eps > 0.0 && opts.eps < 1.0) {
        return Err(Error::invalid("need n_alphas >= 2 and eps in (0, 1)"));
    }
    let x_mean = x.mean_axis(Axis(0)).expect("nonempty");
    let xc = x - &x_mean;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let a_max = alpha_max(&xc, &yc);
    if !(a_max > 0.0) {
        return Err(Error::invalid(
            "degenerate lasso problem: the target is uncorrelated with every column",
        ));
    }
    let last = (opts.n_alphas - 1) as f64;
    let alphas: Vec<f64> = (0..opts.n_alphas)
        .map(|k| a_max * opts.eps.powf(k as f64 / last))
        .collect();
    let mut coefficients = Vec::with_capacity(alphas.len());
    let mut converged = Vec::with_capacity(alphas.len());
    let mut traces = Vec::with_capacity(alphas.len());
    let mut solver = Solver::new(&xc, &yc);
    let mut w: Vec<f64> = vec![0.0; x.ncols()];
    for &alpha in &alphas {
        let fit = solver.solve(alpha, w, opts);
        w = fit.w.clone();
        coefficients.push(fit.w);
        converged.push(fit.converged);
        traces.push(fit.objective_trace);
    }
    Ok(LassoPath {
        alphas,
        coefficients,
        n,
        converged,
        objective_traces: traces,
        x_mean: x_mean.to_vec(),
        y_mean,
    })
}

/// Features with nonzero weight at the path alpha minimising validation MSE
/// (the larger alpha wins ties). A target without signal selects nothing.
pub fn lasso_select(
    x_train: &FeatureMatrix,
    y_train: &[f64],
    x_val: &FeatureMatrix,
    y_val: &[f64],
) -> Result<Vec<String>> {
    if x_train.names != x_val.names {
        return Err(Error::FeatureMismatch {
            expected: x_train.names.clone(),
            found: x_val.names.clone(),
        });
    }
    check_finite(&x_val.values, y_val)?;
    check_finite(&x_train.values, y_train)?;
    let x_mean = x_train.values.mean_axis(Axis(0));
    let Some(x_mean) = x_mean else {
        return Err(Error::invalid("empty training set"));
    };
    let y_mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
    let yc: Vec<f64> = y_train.iter().map(|v| v - y_mean).collect();
    if alpha_max(&(&x_train.values - &x_mean), &yc) == 0.0 {
        return Ok(Vec::new());
    }
    let path = lasso_path(&x_train.values, y_train)?;
    let xv = &x_val.values - &ArrayView1::from(&path.x_mean[..]);
    let mut best: Option<(f64, usize)> = None;
    for (k, w) in path.coefficients.iter().enumerate() {
        let pred = xv.dot(&ArrayView1::from(&w[..]));
        let mse = pred
            .iter()
            .zip(y_val)
            .map(|(p, y)| (path.y_mean + p - y).powi(2))
            .sum::<f64>()
            / y_val.len().max(1) as f64;
        if best.is_none_or(|(b, _)| mse < b) {
            best = Some((mse, k));
        }
    }
    let (_, k) = best.expect("path is nonempty");
    Ok(path.coefficients[k]
        .iter()
        .zip(&x_train.names)
        .filter(|(w, _)| w.abs() > NONZERO_TOL)
        .map(|(_, n)| n.clone())
        .collect())
}
