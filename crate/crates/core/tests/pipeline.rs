use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ctprog::config::RunConfig;
use ctprog::evalmetrics::pearson;
use ctprog::io::{read_manifest, PredictionRow};
use ctprog::pipeline::{evaluate, evaluate_segmentation, extract_features};
use ctprog::staging::Outcome;
use ctprog::synth::{generate_patient, write_cohort, SynthParams};
use ctprog::volume::{Geometry, Mask, MaskRole};
use rayon::prelude::*;

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn synthetic_cohort_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let params = SynthParams::default();
    write_cohort(a.path(), 50, 3, &params).unwrap();
    write_cohort(b.path(), 50, 3, &params).unwrap();
    let (ta, tb) = (tree_bytes(a.path()), tree_bytes(b.path()));
    assert_eq!(ta.len(), 50 * 10 + 2);
    assert!(ta == tb, "cohorts differ");
    let manifest = String::from_utf8(ta["manifest.csv"].clone()).unwrap();
    assert!(manifest.starts_with('#'));
    assert!(manifest.contains("severity_extent_coef=0.25"));
    assert!(write_cohort(a.path(), 49, 3, &params).is_err());
}

#[test]
fn generator_audit() {
    let params = SynthParams::default();
    let patients: Vec<_> = (0..400usize)
        .into_par_iter()
        .map(|i| {
            let p = generate_patient(i, 7, &params).unwrap();
            (p.extent_pct, p.outcome, p.age)
        })
        .collect();
    let extent: Vec<f64> = patients.iter().map(|p| p.0).collect();
    let severe: Vec<f64> = patients.iter().map(|p| p.1.is_severe() as u8 as f64).collect();
    let lo = extent.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = extent.iter().cloned().fold(0.0, f64::max);
    assert!(lo <= 0.0 && hi >= 50.0, "extent range [{lo}, {hi}]");
    let r = pearson(&extent, &severe).unwrap();
    assert!(r > 0.3, "pearson {r}");
    assert!(patients.iter().all(|p| (25.0..=95.0).contains(&p.2)));
    for o in Outcome::ALL {
        assert!(patients.iter().any(|p| p.1 == o), "no {o:?}");
    }
}

#[test]
fn extraction_is_ordered_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write_cohort(dir.path(), 50, 11, &SynthParams::default()).unwrap();
    let m = read_manifest(&dir.path().join("manifest.csv")).unwrap();
    let rows = &m.rows[..3];
    let cfg = RunConfig::default();
    let (t1, f1) = extract_features(rows, &cfg).unwrap();
    assert!(f1.is_empty());
    assert_eq!(t1.len(), 3);
    assert!(t1.rows.iter().all(|r| r.values.len() == t1.names.len()));

    let (t2, _) = extract_features(rows, &cfg).unwrap();
    let (mut b1, mut b2) = (Vec::new(), Vec::new());
    t1.write_csv(&mut b1).unwrap();
    t2.write_csv(&mut b2).unwrap();
    assert!(b1 == b2);

    let reversed: Vec<_> = rows.iter().rev().cloned().collect();
    let (t3, _) = extract_features(&reversed, &cfg).unwrap();
    assert_eq!(t3.names, t1.names);
    for (a, b) in t3.rows.iter().rev().zip(&t1.rows) {
        assert_eq!(a, b);
    }
}

#[test]
fn missing_files_fail_their_row_only() {
    let dir = tempfile::tempdir().unwrap();
    write_cohort(dir.path(), 50, 12, &SynthParams::default()).unwrap();
    let m = read_manifest(&dir.path().join("manifest.csv")).unwrap();
    let rows = m.rows[..3].to_vec();
    fs::remove_file(rows[1].disease.as_ref().unwrap()).unwrap();
    fs::remove_file(rows[1].disease.as_ref().unwrap().with_extension("raw")).unwrap();
    let (t, failures) = extract_features(&rows, &RunConfig::default()).unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0].patient_id, rows[1].patient_id);
    assert!(failures[0].error.is_input_contract(), "{}", failures[0].error);
}

#[test]
fn perfect_predictions_score_one() {
    let outcomes = [Outcome::NonSevere, Outcome::Intubated, Outcome::Deceased, Outcome::Deceased, Outcome::NonSevere];
    let preds: Vec<PredictionRow> = outcomes
        .iter()
        .enumerate()
        .map(|(i, &o)| PredictionRow {
            patient_id: format!("p{i}"),
            outcome: Some(o),
            hierarchical: Some(o),
            ovr: Some(o),
            ..Default::default()
        })
        .collect();
    let truth: Vec<(String, Outcome)> = outcomes.iter().enumerate().map(|(i, &o)| (format!("p{i}"), o)).collect();
    let reports = evaluate(&preds, &truth).unwrap();
    let tasks: Vec<&str> = reports.iter().map(|r| r.0.as_str()).collect();
    assert_eq!(tasks, ["stage1", "stage2", "three_class_hierarchical", "three_class_ovr"]);
    for (task, r) in &reports {
        assert_eq!(r.values(), [1.0; 4], "{task}");
    }
    assert!(evaluate(&preds, &[("other".into(), Outcome::Deceased)]).is_err());
}

#[test]
fn segmentation_comparison_rows() {
    let g = Geometry::new([10, 8, 4], [1.0, 1.0, 2.0], [0.0; 3]).unwrap();
    let lungs = Mask::from_fn(g, MaskRole::LungLeft, |x, _, _| x < 8);
    let a = Mask::from_fn(g, MaskRole::Disease, |x, y, _| x < 4 && y < 4);
    let b = Mask::from_fn(g, MaskRole::Disease, |x, y, _| x < 4 && y < 2);
    let rows = evaluate_segmentation(&a, &a, &b, &lungs).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].comparison, "pred_vs_a");
    assert_eq!(rows[0].dice, 1.0);
    assert_eq!(rows[0].hausdorff_mm, Some(0.0));
    assert_eq!(rows[0].extent_first_pct, 25.0);
    assert!((rows[2].dice - 2.0 * 32.0 / 96.0).abs() < 1e-12);
    assert_eq!(rows[2].hausdorff_mm, Some(2.0));
    assert_eq!(rows[2].extent_second_pct, 12.5);

    let empty = Mask::empty(g, MaskRole::Disease);
    let rows = evaluate_segmentation(&empty, &a, &b, &lungs).unwrap();
    assert_eq!(rows[0].hausdorff_mm, None);

    let other = Geometry::unit([10, 8, 4]).unwrap();
    let moved = Mask::empty(other, MaskRole::Disease);
    assert!(evaluate_segmentation(&moved, &a, &b, &lungs).unwrap_err().is_input_contract());
}
