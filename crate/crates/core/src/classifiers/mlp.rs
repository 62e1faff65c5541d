use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, TrainSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct MlpOptions {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

const BATCH: usize = 200;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One hidden ReLU layer with a softmax output, trained with Adam on the
/// sample-weighted cross-entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_in: usize,
    pub hidden: usize,
    pub n_out: usize,
    /// Row-major `n_in × hidden`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `hidden × n_out`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [&mut Vec<f64>], grads: &[Vec<f64>], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let mut k = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (pi, gi) in p.iter_mut().zip(g) {
                self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * gi;
                self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * gi * gi;
                *pi -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + ADAM_EPS);
                k += 1;
            }
        }
    }
}

impl Mlp {
    fn forward(&self, x: &[f64], h: &mut [f64], out: &mut [f64]) {
        for j in 0..self.hidden {
            let mut s = self.b1[j];
            for (i, xi) in x.iter().enumerate() {
                s += xi * self.w1[i * self.hidden + j];
            }
            h[j] = s.max(0.0);
        }
        for k in 0..self.n_out {
            let mut s = self.b2[k];
            for j in 0..self.hidden {
                s += h[j] * self.w2[j * self.n_out + k];
            }
            out[k] = s;
        }
        let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for o in out.iter_mut() {
            *o = (*o - m).exp();
            z += *o;
        }
        out.iter_mut().for_each(|o| *o /= z);
    }

    pub(crate) fn fit(data: &TrainSet, opts: MlpOptions, seed: u64) -> Result<Self> {
        if opts.hidden == 0 || opts.epochs == 0 || !(opts.learning_rate > 0.0) {
            return Err(Error::invalid("MLP needs hidden units, epochs and a positive learning rate"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, p) = data.x.dim();
        let (h, k) = (opts.hidden, data.n_classes);
        let mut init = |fan_in: usize, fan_out: usize, len: usize| -> Vec<f64> {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..len).map(|_| rng.random_range(-bound..bound)).collect()
        };
        let mut net = Mlp {
            n_in: p,
            hidden: h,
            n_out: k,
            w1: init(p, h, p * h),
            b1: init(p, h, h),
            w2: init(h, k, h * k),
            b2: init(h, k, k),
        };
        let mut adam = Adam::new(p * h + h + h * k + k);
        let rows: Vec<Vec<f64>> = data.x.rows().into_iter().map(|r| r.to_vec()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        let mut hid = vec![0.0; h];
        let mut out = vec![0.0; k];
        for _ in 0..opts.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(BATCH) {
                let mut g_w1 = vec![0.0; p * h];
                let mut g_b1 = vec![0.0; h];
                let mut g_w2 = vec![0.0; h * k];
                let mut g_b2 = vec![0.0; k];
                let wsum: f64 = batch.iter().map(|&i| data.w[i]).sum();
                for &i in batch {
                    net.forward(&rows[i], &mut hid, &mut out);
                    let scale = data.w[i] / wsum;
                    let delta_out: Vec<f64> = (0..k)
                        .map(|c| scale * (out[c] - (data.y[i] == c) as u8 as f64))
                        .collect();
                    for j in 0..h {
                        let mut back = 0.0;
                        for c in 0..k {
                            g_w2[j * k + c] += hid[j] * delta_out[c];
                            back += net.w2[j * k + c] * delta_out[c];
                        }
                        if hid[j] > 0.0 {
                            g_b1[j] += back;
                            for (q, xq) in rows[i].iter().enumerate() {
                                g_w1[q * h + j] += xq * back;
                            }
                        }
                    }
                    for c in 0..k {
                        g_b2[c] += delta_out[c];
                    }
                }
                let reg = opts.l2 / batch.len() as f64;
                g_w1.iter_mut().zip(&net.w1).for_each(|(g, w)| *g += reg * w);
                g_w2.iter_mut().zip(&net.w2).for_each(|(g, w)| *g += reg * w);
                let grads = [g_w1, g_b1, g_w2, g_b2];
                let Mlp { w1, b1, w2, b2, .. } = &mut net;
                adam.step(&mut [w1, b1, w2, b2], &grads, opts.learning_rate);
            }
        }
        Ok(net)
    }

    pub(crate) fn predict(&self, x: &ArrayView2<f64>) -> Vec<usize> {
        let mut hid = vec![0.0; self.hidden];
        let mut out = vec![0.0; self.n_out];
        x.rows()
            .into_iter()
            .map(|r| {
                self.forward(&r.to_vec(), &mut hid, &mut out);
                argmax(&out)
            })
            .collect()
    }
}
