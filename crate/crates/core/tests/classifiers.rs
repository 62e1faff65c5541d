use ctprog::classifiers::{
    classification_metrics, fit, predict, ClassifierKind, ClassifierSpec, Label, MaxFeatures,
};
use ctprog::table::FeatureMatrix;
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ba(y: &[Label], p: &[Label]) -> f64 {
    classification_metrics(y, p).unwrap().balanced_accuracy
}

fn two_clouds(seed: u64, n: usize, gap: f64) -> (FeatureMatrix, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as Label;
        let centre = if label == 1 { gap } else { -gap };
        v[[i, 0]] = centre + rng.random_range(-1.0..1.0);
        v[[i, 1]] = rng.random_range(-1.0..1.0);
        y.push(label);
    }
    (FeatureMatrix::anonymous(v), y)
}

/// Unequal quadrant counts so no single split beats chance by much.
fn xor(seed: u64) -> (FeatureMatrix, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = [(1.0, 1.0, 70), (-1.0, -1.0, 50), (1.0, -1.0, 60), (-1.0, 1.0, 40)];
    let n: usize = counts.iter().map(|c| c.2).sum();
    let mut v = Array2::zeros((n, 2));
    let mut y = Vec::new();
    let mut i = 0;
    for (sx, sy, k) in counts {
        for _ in 0..k {
            v[[i, 0]] = sx * rng.random_range(0.1..1.0);
            v[[i, 1]] = sy * rng.random_range(0.1..1.0);
            y.push(Label::from(sx * sy < 0.0));
            i += 1;
        }
    }
    (FeatureMatrix::anonymous(v), y)
}

fn fit_predict(spec: &ClassifierSpec, x: &FeatureMatrix, y: &[Label]) -> Vec<Label> {
    let m = fit(spec, x, y, 11).unwrap();
    predict(&m, x).unwrap()
}

#[test]
fn linear_svm_separates_two_clouds() {
    let (x, y) = two_clouds(1, 200, 3.0);
    assert_eq!(ba(&y, &fit_predict(&ClassifierSpec::linear_svm(), &x, &y)), 1.0);
}

#[test]
fn tree_depth_matters_on_xor() {
    let (x, y) = xor(2);
    let stump = ClassifierSpec::new(ClassifierKind::DecisionTree { max_depth: 1 });
    let deep = ClassifierSpec::new(ClassifierKind::DecisionTree { max_depth: 3 });
    let shallow = ba(&y, &fit_predict(&stump, &x, &y));
    assert!(shallow <= 0.6, "depth 1: {shallow}");
    let full = ba(&y, &fit_predict(&deep, &x, &y));
    assert!(full >= 0.9, "depth 3: {full}");
}

#[test]
fn one_neighbour_recalls_its_training_points() {
    let (x, y) = two_clouds(3, 80, 0.2);
    let spec = ClassifierSpec::new(ClassifierKind::NearestNeighbors { k: 1 });
    assert_eq!(fit_predict(&spec, &x, &y), y);
}

#[test]
fn gaussian_nb_falls_back_to_prior() {
    // Identical class-conditional distributions, 3:1 prior.
    let mut v = Array2::zeros((80, 1));
    let mut y = Vec::new();
    for i in 0..80 {
        v[[i, 0]] = [-1.0, 0.0, 1.0, 2.0][i % 4];
        y.push(if i < 60 { 4 } else { 9 });
    }
    let x = FeatureMatrix::anonymous(v);
    let spec = ClassifierSpec::gaussian_nb().without_class_weighting();
    let p = fit_predict(&spec, &x, &y);
    assert!(p.iter().all(|&l| l == 4));
}

#[test]
fn constant_features_give_one_label() {
    let x = FeatureMatrix::anonymous(Array2::from_elem((30, 3), 0.5));
    let y: Vec<Label> = (0..30).map(|i| (i % 3 == 0) as Label).collect();
    for spec in ClassifierSpec::all_thirteen() {
        let p = fit_predict(&spec, &x, &y);
        assert!(p.iter().all(|&l| l == p[0]), "{}", spec.name());
    }
}

#[test]
fn feature_names_must_match() {
    let values = Array2::from_shape_fn((20, 2), |(i, j)| (i * (j + 1)) as f64);
    let x = FeatureMatrix::new(vec!["a".into(), "b".into()], values.clone()).unwrap();
    let y: Vec<Label> = (0..20).map(|i| (i >= 10) as Label).collect();
    let m = fit(&ClassifierSpec::decision_tree(), &x, &y, 0).unwrap();
    let swapped = FeatureMatrix::new(vec!["b".into(), "a".into()], values).unwrap();
    assert!(predict(&m, &swapped).is_err());
}

#[test]
fn fit_rejects_bad_input() {
    let x = FeatureMatrix::anonymous(Array2::zeros((4, 1)));
    assert!(fit(&ClassifierSpec::qda(), &x, &[0, 1, 0], 0).is_err());
    assert!(fit(&ClassifierSpec::qda(), &x, &[1, 1, 1, 1], 0).is_err());
    let mut bad = Array2::zeros((4, 1));
    bad[[2, 0]] = f64::NAN;
    assert!(fit(&ClassifierSpec::qda(), &FeatureMatrix::anonymous(bad), &[0, 1, 0, 1], 0).is_err());
}

#[test]
fn single_unbagged_forest_is_a_tree() {
    let (x, y) = xor(4);
    for depth in [1, 2, 4] {
        let forest = ClassifierSpec::new(ClassifierKind::RandomForest {
            n_trees: 1,
            max_depth: depth,
            bootstrap: false,
            max_features: MaxFeatures::All,
        });
        let tree = ClassifierSpec::new(ClassifierKind::DecisionTree { max_depth: depth });
        assert_eq!(fit_predict(&forest, &x, &y), fit_predict(&tree, &x, &y));
    }
}

#[test]
fn one_boosting_round_is_the_base_tree() {
    let (x, y) = two_clouds(5, 90, 0.5);
    let boost = ClassifierSpec::new(ClassifierKind::AdaBoost { n_rounds: 1, base_depth: 2 });
    let tree = ClassifierSpec::new(ClassifierKind::DecisionTree { max_depth: 2 });
    assert_eq!(fit_predict(&boost, &x, &y), fit_predict(&tree, &x, &y));
}

#[test]
fn every_method_is_deterministic_and_serialisable() {
    let (x, y) = two_clouds(6, 60, 0.8);
    for spec in ClassifierSpec::all_thirteen() {
        let a = fit(&spec, &x, &y, 21).unwrap();
        let b = fit(&spec, &x, &y, 21).unwrap();
        assert_eq!(a, b, "{}", spec.name());
        let p = predict(&a, &x).unwrap();
        assert_eq!(p.len(), 60);
        let back: ctprog::classifiers::FittedModel =
            serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(predict(&back, &x).unwrap(), p, "{}", spec.name());
    }
}

#[test]
fn three_classes_are_supported() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 90;
    let v = Array2::from_shape_fn((n, 2), |(i, j)| {
        let centre = [[0.0, 4.0], [4.0, 0.0], [-4.0, -4.0]][i % 3][j];
        centre + rng.random_range(-1.0..1.0)
    });
    let x = FeatureMatrix::anonymous(v);
    let y: Vec<Label> = (0..n).map(|i| (i % 3) as Label).collect();
    for spec in ClassifierSpec::all_thirteen() {
        let p = fit_predict(&spec, &x, &y);
        assert!(p.iter().all(|l| *l < 3), "{}", spec.name());
    }
    for spec in [ClassifierSpec::linear_svm(), ClassifierSpec::gaussian_nb(), ClassifierSpec::decision_tree()] {
        assert!(ba(&y, &fit_predict(&spec, &x, &y)) > 0.95, "{}", spec.name());
    }
}

#[test]
fn class_weighting_lifts_the_minority() {
    // 90:10 overlap; unweighted, the margin sides with the majority.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 200;
    let y: Vec<Label> = (0..n).map(|i| (i % 10 == 0) as Label).collect();
    let v = Array2::from_shape_fn((n, 1), |(i, _)| y[i] as f64 * 0.8 + rng.random_range(-1.0..1.0));
    let x = FeatureMatrix::anonymous(v);
    let weighted = ba(&y, &fit_predict(&ClassifierSpec::linear_svm(), &x, &y));
    let plain = ba(&y, &fit_predict(&ClassifierSpec::linear_svm().without_class_weighting(), &x, &y));
    assert!(weighted > plain, "{weighted} vs {plain}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn balanced_accuracy_ignores_row_order(
        pairs in proptest::collection::vec((0u32..3, 0u32..3), 2..60),
        seed in any::<u64>(),
    ) {
        let (y, p): (Vec<Label>, Vec<Label>) = pairs.iter().copied().unzip();
        let mut idx: Vec<usize> = (0..y.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let ys: Vec<Label> = idx.iter().map(|&i| y[i]).collect();
        let ps: Vec<Label> = idx.iter().map(|&i| p[i]).collect();
        let a = classification_metrics(&y, &p).unwrap();
        let b = classification_metrics(&ys, &ps).unwrap();
        prop_assert!((a.balanced_accuracy - b.balanced_accuracy).abs() < 1e-12);
        prop_assert!((a.weighted_precision - b.weighted_precision).abs() < 1e-12);
    }

    #[test]
    fn tree_predictions_follow_rows(seed in 0u64..1000) {
        let (x, y) = two_clouds(seed, 40, 0.6);
        let m = fit(&ClassifierSpec::decision_tree(), &x, &y, 0).unwrap();
        let all = predict(&m, &x).unwrap();
        let idx: Vec<usize> = (0..40).rev().collect();
        let rev = predict(&m, &x.rows(&idx)).unwrap();
        prop_assert_eq!(rev, idx.iter().map(|&i| all[i]).collect::<Vec<_>>());
    }
}
