use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, MaxFeatures, TrainSet};
use crate::error::Result;
use crate::numeric::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Class distribution of the training weight reaching the leaf.
    Leaf { dist: Vec<f64> },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// CART tree on weighted Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

fn gini(dist: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - dist.iter().map(|d| (d / total) * (d / total)).sum::<f64>()
}

struct Builder<'a, 'b> {
    data: &'a TrainSet<'b>,
    w: &'a [f64],
    max_depth: usize,
    max_features: MaxFeatures,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
}

impl Builder<'_, '_> {
    fn leaf(&mut self, dist: Vec<f64>) -> usize {
        let total: f64 = dist.iter().sum();
        let dist = if total > 0.0 { dist.iter().map(|d| d / total).collect() } else { dist };
        self.nodes.push(Node::Leaf { dist });
        self.nodes.len() - 1
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.data.x.ncols();
        match (self.max_features, self.rng.as_deref_mut()) {
            (MaxFeatures::Sqrt, Some(rng)) => {
                let m = ((p as f64).sqrt().floor() as usize).clamp(1, p);
                let mut f = sample(rng, p, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let k = self.data.n_classes;
        let mut dist = vec![0.0; k];
        for &r in rows {
            dist[self.data.y[r]] += self.w[r];
        }
        let total: f64 = dist.iter().sum();
        let pure = dist.iter().filter(|&&d| d > 0.0).count() <= 1;
        if depth >= self.max_depth || pure || rows.len() < 2 {
            return self.leaf(dist);
        }
        let parent = total * gini(&dist, total);
        let mut best: Option<(f64, usize, f64)> = None;
        let x = &self.data.x;
        for f in self.candidate_features() {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
            let mut left = vec![0.0; k];
            let mut wl = 0.0;
            for s in 0..order.len() - 1 {
                let r = order[s];
                left[self.data.y[r]] += self.w[r];
                wl += self.w[r];
                let (a, b) = (x[[r, f]], x[[order[s + 1], f]]);
                if a >= b {
                    continue;
                }
                let mut thr = a + (b - a) / 2.0;
                if thr >= b {
                    thr = a;
                }
                let right: Vec<f64> = dist.iter().zip(&left).map(|(d, l)| d - l).collect();
                let wr = total - wl;
                let gain = parent - wl * gini(&left, wl) - wr * gini(&right, wr);
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(dist);
        };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| x[[r, feature]] <= threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { dist: Vec::new() });
        let left = self.build(&l_rows, depth + 1);
        let right = self.build(&r_rows, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

impl Tree {
    /// Fits on every row with positive weight.
    pub(crate) fn fit(
        data: &TrainSet,
        w: &[f64],
        max_depth: usize,
        max_features: MaxFeatures,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let rows: Vec<usize> = (0..data.y.len()).filter(|&i| w[i] > 0.0).collect();
        let mut b = Builder {
            data,
            w,
            max_depth,
            max_features,
            rng,
            nodes: Vec::new(),
        };
        b.build(&rows, 0);
        Tree { nodes: b.nodes }
    }

    pub fn leaf_dist(&self, x: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { dist } => return dist,
                Node::Split { feature, threshold, left, right } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn predict_row(&self, x: &[f64]) -> usize {
        argmax(self.leaf_dist(x))
    }

    pub(crate) fn predict(&self, x: &ArrayView2<f64>) -> Vec<usize> {
        x.rows().into_iter().map(|r| self.predict_row(&r.to_vec())).collect()
    }
}

/// Bagged trees with per-node feature subsampling; predictions average the
/// leaf distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub(crate) fn fit(
        data: &TrainSet,
        n_trees: usize,
        max_depth: usize,
        bootstrap: bool,
        max_features: MaxFeatures,
        seed: u64,
    ) -> Result<Self> {
        if n_trees == 0 {
            return Err(crate::Error::invalid("a forest needs at least one tree"));
        }
        let n = data.y.len();
        let trees = (0..n_trees)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
                let w: Vec<f64> = if bootstrap {
                    let mut counts = vec![0u32; n];
                    for _ in 0..n {
                        counts[rng.random_range(0..n)] += 1;
                    }
                    data.w.iter().zip(&counts).map(|(w, &c)| w * c as f64).collect()
                } else {
                    data.w.clone()
                };
                Tree::fit(data, &w, max_depth, max_features, Some(&mut rng))
            })
            .collect();
        Ok(Forest { trees })
    }

    pub(crate) fn predict(&self, x: &ArrayView2<f64>) -> Vec<usize> {
        x.rows()
            .into_iter()
            .map(|r| {
                let row = r.to_vec();
                let mut acc = self.trees[0].leaf_dist(&row).to_vec();
                for t in &self.trees[1..] {
                    for (a, d) in acc.iter_mut().zip(t.leaf_dist(&row)) {
                        *a += d;
                    }
                }
                argmax(&acc)
            })
            .collect()
    }
}

/// Discrete multi-class AdaBoost (SAMME) over shallow trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub n_classes: usize,
    pub trees: Vec<Tree>,
    pub alphas: Vec<f64>,
}

impl AdaBoost {
    pub(crate) fn fit(data: &TrainSet, n_rounds: usize, base_depth: usize) -> Result<Self> {
        if n_rounds == 0 {
            return Err(crate::Error::invalid("boosting needs at least one round"));
        }
        let k = data.n_classes as f64;
        let mut w = data.w.clone();
        let mut trees = Vec::new();
        let mut alphas = Vec::new();
        for round in 0..n_rounds {
            let tree = Tree::fit(data, &w, base_depth, MaxFeatures::All, None);
            let pred = tree.predict(&data.x);
            let total: f64 = w.iter().sum();
            let miss: f64 = w
                .iter()
                .zip(pred.iter().zip(&data.y))
                .filter(|(_, (p, y))| p != y)
                .map(|(w, _)| w)
                .sum();
            let err = miss / total;
            if err <= 0.0 {
                trees.push(tree);
                alphas.push(1.0);
                break;
            }
            if err >= 1.0 - 1.0 / k {
                if round == 0 {
                    trees.push(tree);
                    alphas.push(1.0);
                }
                break;
            }
            let alpha = ((1.0 - err) / err).ln() + (k - 1.0).ln();
            for ((wi, p), y) in w.iter_mut().zip(&pred).zip(&data.y) {
                if p != y {
                    *wi *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            trees.push(tree);
            alphas.push(alpha);
        }
        Ok(AdaBoost {
            n_classes: data.n_classes,
            trees,
            alphas,
        })
    }

    pub(crate) fn predict(&self, x: &ArrayView2<f64>) -> Vec<usize> {
        let per_tree: Vec<Vec<usize>> = self.trees.iter().map(|t| t.predict(x)).collect();
        (0..x.nrows())
            .map(|i| {
                let mut scores = vec![0.0; self.n_classes];
                for (p, a) in per_tree.iter().zip(&self.alphas) {
                    scores[p[i]] += a;
                }
                argmax(&scores)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn set(x: &Array2<f64>, y: Vec<usize>) -> TrainSet<'_> {
        let n = y.len();
        TrainSet {
            x: x.view(),
            y,
            w: vec![1.0; n],
            n_classes: 2,
        }
    }

    #[test]
    fn stump_on_separable_line() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let d = set(&x, vec![0, 0, 1, 1]);
        let t = Tree::fit(&d, &d.w, 1, MaxFeatures::All, None);
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 1.5);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(t.predict(&x.view()), vec![0, 0, 1, 1]);
    }

    #[test]
    fn depth_is_bounded() {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
        let y: Vec<usize> = (0..40).map(|i| (i * 13 % 5 % 2) as usize).collect();
        let d = set(&x, y);
        for depth in 0..5 {
            assert!(Tree::fit(&d, &d.w, depth, MaxFeatures::All, None).depth() <= depth);
        }
    }

    #[test]
    fn tie_goes_to_lowest_feature() {
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        let d = set(&x, vec![0, 1]);
        let t = Tree::fit(&d, &d.w, 1, MaxFeatures::All, None);
        assert!(matches!(t.nodes[0], Node::Split { feature: 0, .. }));
    }
}
