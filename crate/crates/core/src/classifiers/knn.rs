use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::TrainSet;
use crate::error::{Error, Result};

/// Uniform-vote k nearest neighbours under Euclidean distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub n_classes: usize,
    pub x: Array2<f64>,
    pub y: Vec<usize>,
}

impl Knn {
    pub(crate) fn fit(data: &TrainSet, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        Ok(Self {
            k,
            n_classes: data.n_classes,
            x: data.x.to_owned(),
            y: data.y.clone(),
        })
    }

    /// Vote ties go to the tied class whose member is nearest; distance ties
    /// to the earlier training row.
    pub(crate) fn predict(&self, x: &ArrayView2<f64>) -> Vec<usize> {
        let k = self.k.min(self.y.len());
        x.rows()
            .into_iter()
            .map(|q| {
                let mut d: Vec<(f64, usize)> = self
                    .x
                    .rows()
                    .into_iter()
                    .enumerate()
                    .map(|(i, r)| (r.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut votes = vec![0usize; self.n_classes];
                for &(_, i) in &d[..k] {
                    votes[self.y[i]] += 1;
                }
                let top = *votes.iter().max().unwrap();
                d[..k]
                    .iter()
                    .map(|&(_, i)| self.y[i])
                    .find(|&c| votes[c] == top)
                    .unwrap()
            })
            .collect()
    }
}
