//! The thirteen screened classifiers, class weighting, classification metrics
//! and the screening rule that keeps the methods fit for the ensemble.

mod bayes;
mod gp;
mod knn;
mod metrics;
mod mlp;
mod qda;
mod screen;
mod svm;
mod tree;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::FeatureMatrix;

pub use metrics::{
    classification_metrics, metrics_from_confusion_labels, ConfusionMatrix, MetricsReport,
};
pub use screen::{
    method_screen, write_screen_csv, GapRule, MetricSummary, ScreenReport, ScreenRow,
    ScreenThresholds,
};
pub use svm::Kernel;

/// Class labels are small non-negative integers.
pub type Label = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierKind {
    NearestNeighbors { k: usize },
    LinearSvm { c: f64 },
    /// `gamma: None` uses `1 / (p · var(X))`.
    PolySvm { c: f64, degree: u32, gamma: Option<f64>, coef0: f64 },
    SigmoidSvm { c: f64, gamma: Option<f64>, coef0: f64 },
    RbfSvm { c: f64, gamma: f64 },
    GaussianProcess { length_scale: f64, max_samples: usize },
    DecisionTree { max_depth: usize },
    RandomForest { n_trees: usize, max_depth: usize, bootstrap: bool, max_features: MaxFeatures },
    Mlp { hidden: usize, epochs: usize, learning_rate: f64, l2: f64 },
    AdaBoost { n_rounds: usize, base_depth: usize },
    GaussianNb { var_smoothing: f64 },
    BernoulliNb { binarize: f64, alpha: f64 },
    Qda { reg: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    #[serde(flatten)]
    pub kind: ClassifierKind,
    pub class_weighting: bool,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> Self {
        Self {
            kind,
            class_weighting: true,
        }
    }

    pub fn without_class_weighting(mut self) -> Self {
        self.class_weighting = false;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ClassifierKind::NearestNeighbors { .. } => "nearest_neighbors",
            ClassifierKind::LinearSvm { .. } => "linear_svm",
            ClassifierKind::PolySvm { .. } => "poly_svm",
            ClassifierKind::SigmoidSvm { .. } => "sigmoid_svm",
            ClassifierKind::RbfSvm { .. } => "rbf_svm",
            ClassifierKind::GaussianProcess { .. } => "gaussian_process",
            ClassifierKind::DecisionTree { .. } => "decision_tree",
            ClassifierKind::RandomForest { .. } => "random_forest",
            ClassifierKind::Mlp { .. } => "mlp",
            ClassifierKind::AdaBoost { .. } => "adaboost",
            ClassifierKind::GaussianNb { .. } => "gaussian_nb",
            ClassifierKind::BernoulliNb { .. } => "bernoulli_nb",
            ClassifierKind::Qda { .. } => "qda",
        }
    }

    pub fn nearest_neighbors() -> Self {
        Self::new(ClassifierKind::NearestNeighbors { k: 5 })
    }
    pub fn linear_svm() -> Self {
        Self::new(ClassifierKind::LinearSvm { c: 0.25 })
    }
    pub fn poly_svm() -> Self {
        Self::new(ClassifierKind::PolySvm { c: 0.25, degree: 3, gamma: None, coef0: 0.0 })
    }
    pub fn sigmoid_svm() -> Self {
        Self::new(ClassifierKind::SigmoidSvm { c: 0.25, gamma: None, coef0: 0.0 })
    }
    pub fn rbf_svm() -> Self {
        Self::new(ClassifierKind::RbfSvm { c: 0.25, gamma: 3.0 })
    }
    pub fn gaussian_process() -> Self {
        Self::new(ClassifierKind::GaussianProcess { length_scale: 1.0, max_samples: 500 })
    }
    pub fn decision_tree() -> Self {
        Self::new(ClassifierKind::DecisionTree { max_depth: 3 })
    }
    pub fn random_forest() -> Self {
        Self::new(ClassifierKind::RandomForest {
            n_trees: 8,
            max_depth: 3,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
        })
    }
    pub fn mlp() -> Self {
        Self::new(ClassifierKind::Mlp { hidden: 32, epochs: 200, learning_rate: 1e-3, l2: 1e-4 })
    }
    pub fn adaboost() -> Self {
        Self::new(ClassifierKind::AdaBoost { n_rounds: 3, base_depth: 2 })
    }
    pub fn gaussian_nb() -> Self {
        Self::new(ClassifierKind::GaussianNb { var_smoothing: 1e-9 })
    }
    pub fn bernoulli_nb() -> Self {
        Self::new(ClassifierKind::BernoulliNb { binarize: 0.5, alpha: 1.0 })
    }
    pub fn qda() -> Self {
        Self::new(ClassifierKind::Qda { reg: 1e-6 })
    }

    /// Every screened method with default settings, in report order.
    pub fn all_thirteen() -> Vec<Self> {
        vec![
            Self::nearest_neighbors(),
            Self::linear_svm(),
            Self::poly_svm(),
            Self::sigmoid_svm(),
            Self::rbf_svm(),
            Self::gaussian_process(),
            Self::decision_tree(),
            Self::random_forest(),
            Self::mlp(),
            Self::adaboost(),
            Self::gaussian_nb(),
            Self::bernoulli_nb(),
            Self::qda(),
        ]
    }

    /// The seven methods kept for the clinical ensemble.
    pub fn retained_seven() -> Vec<Self> {
        vec![
            Self::linear_svm(),
            Self::poly_svm(),
            Self::rbf_svm(),
            Self::decision_tree(),
            Self::random_forest(),
            Self::adaboost(),
            Self::gaussian_nb(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Knn(knn::Knn),
    Svm(svm::SvmModel),
    Gp(gp::GpModel),
    Tree(tree::Tree),
    Forest(tree::Forest),
    AdaBoost(tree::AdaBoost),
    Mlp(mlp::Mlp),
    GaussianNb(bayes::GaussianNb),
    BernoulliNb(bayes::BernoulliNb),
    Qda(qda::Qda),
}

/// A trained classifier. Predictions require the exact training feature list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ClassifierSpec,
    pub feature_names: Vec<String>,
    pub seed: u64,
    pub classes: Vec<Label>,
    pub params: ModelParams,
}

/// `n / (K · n_k)` for every class present.
pub fn class_weights(y: &[Label]) -> Vec<(Label, f64)> {
    let mut counts = std::collections::BTreeMap::<Label, usize>::new();
    for &l in y {
        *counts.entry(l).or_default() += 1;
    }
    let n = y.len() as f64;
    let k = counts.len() as f64;
    counts.into_iter().map(|(l, c)| (l, n / (k * c as f64))).collect()
}

/// Training data with labels mapped to `0..K` and per-sample weights.
pub(crate) struct TrainSet<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: Vec<usize>,
    pub w: Vec<f64>,
    pub n_classes: usize,
}

impl TrainSet<'_> {
    pub fn class_rows(&self, k: usize) -> Vec<usize> {
        (0..self.y.len()).filter(|&i| self.y[i] == k).collect()
    }
}

pub fn fit(spec: &ClassifierSpec, x: &FeatureMatrix, y: &[Label], seed: u64) -> Result<FittedModel> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if x.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("features must be finite"));
    }
    let weights = class_weights(y);
    if weights.len() < 2 {
        return Err(Error::invalid("at least two classes are required to fit a classifier"));
    }
    let classes: Vec<Label> = weights.iter().map(|w| w.0).collect();
    let y_idx: Vec<usize> = y.iter().map(|l| classes.binary_search(l).unwrap()).collect();
    let w: Vec<f64> = if spec.class_weighting {
        y_idx.iter().map(|&k| weights[k].1).collect()
    } else {
        vec![1.0; y.len()]
    };
    let data = TrainSet {
        x: x.values.view(),
        y: y_idx,
        w,
        n_classes: classes.len(),
    };
    let params = match &spec.kind {
        ClassifierKind::NearestNeighbors { k } => ModelParams::Knn(knn::Knn::fit(&data, *k)?),
        ClassifierKind::LinearSvm { c } => {
            ModelParams::Svm(svm::SvmModel::fit(&data, Kernel::Linear, *c)?)
        }
        ClassifierKind::PolySvm { c, degree, gamma, coef0 } => {
            let gamma = gamma.unwrap_or_else(|| svm::scale_gamma(&data.x));
            ModelParams::Svm(svm::SvmModel::fit(
                &data,
                Kernel::Poly { degree: *degree, gamma, coef0: *coef0 },
                *c,
            )?)
        }
        ClassifierKind::SigmoidSvm { c, gamma, coef0 } => {
            let gamma = gamma.unwrap_or_else(|| svm::scale_gamma(&data.x));
            ModelParams::Svm(svm::SvmModel::fit(&data, Kernel::Sigmoid { gamma, coef0: *coef0 }, *c)?)
        }
        ClassifierKind::RbfSvm { c, gamma } => {
            ModelParams::Svm(svm::SvmModel::fit(&data, Kernel::Rbf { gamma: *gamma }, *c)?)
        }
        ClassifierKind::GaussianProcess { length_scale, max_samples } => {
            ModelParams::Gp(gp::GpModel::fit(&data, *length_scale, *max_samples, seed)?)
        }
        ClassifierKind::DecisionTree { max_depth } => {
            ModelParams::Tree(tree::Tree::fit(&data, &data.w, *max_depth, MaxFeatures::All, None))
        }
        ClassifierKind::RandomForest { n_trees, max_depth, bootstrap, max_features } => {
            ModelParams::Forest(tree::Forest::fit(&data, *n_trees, *max_depth, *bootstrap, *max_features, seed)?)
        }
        ClassifierKind::Mlp { hidden, epochs, learning_rate, l2 } => ModelParams::Mlp(mlp::Mlp::fit(
            &data,
            mlp::MlpOptions { hidden: *hidden, epochs: *epochs, learning_rate: *learning_rate, l2: *l2 },
            seed,
        )?),
        ClassifierKind::AdaBoost { n_rounds, base_depth } => {
            ModelParams::AdaBoost(tree::AdaBoost::fit(&data, *n_rounds, *base_depth)?)
        }
        ClassifierKind::GaussianNb { var_smoothing } => {
            ModelParams::GaussianNb(bayes::GaussianNb::fit(&data, *var_smoothing)?)
        }
        ClassifierKind::BernoulliNb { binarize, alpha } => {
            ModelParams::BernoulliNb(bayes::BernoulliNb::fit(&data, *binarize, *alpha)?)
        }
        ClassifierKind::Qda { reg } => ModelParams::Qda(qda::Qda::fit(&data, *reg)?),
    };
    Ok(FittedModel {
        spec: spec.clone(),
        feature_names: x.names.clone(),
        seed,
        classes,
        params,
    })
}

impl FittedModel {
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<Label>> {
        if x.names != self.feature_names {
            return Err(Error::FeatureMismatch {
                expected: self.feature_names.clone(),
                found: x.names.clone(),
            });
        }
        if x.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features must be finite"));
        }
        let xv = x.values.view();
        let idx = match &self.params {
            ModelParams::Knn(m) => m.predict(&xv),
            ModelParams::Svm(m) => m.predict(&xv),
            ModelParams::Gp(m) => m.predict(&xv),
            ModelParams::Tree(m) => m.predict(&xv),
            ModelParams::Forest(m) => m.predict(&xv),
            ModelParams::AdaBoost(m) => m.predict(&xv),
            ModelParams::Mlp(m) => m.predict(&xv),
            ModelParams::GaussianNb(m) => m.predict(&xv),
            ModelParams::BernoulliNb(m) => m.predict(&xv),
            ModelParams::Qda(m) => m.predict(&xv),
        };
        Ok(idx.into_iter().map(|k| self.classes[k]).collect())
    }
}

pub fn predict(model: &FittedModel, x: &FeatureMatrix) -> Result<Vec<Label>> {
    model.predict(x)
}

/// Predictions of several models on the same rows: one vector per model.
pub fn predict_all(models: &[FittedModel], x: &FeatureMatrix) -> Result<Vec<Vec<Label>>> {
    models.iter().map(|m| m.predict(x)).collect()
}

/// Index of the largest score; ties go to the lowest index.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}
