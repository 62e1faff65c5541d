//! The command-level compositions: extraction over a manifest, consensus
//! feature selection, screening plus ensemble training, prediction and
//! evaluation.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    metrics_from_confusion_labels, method_screen, ClassifierSpec, Label, MetricsReport, ScreenReport,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evalmetrics::{dice_score, disease_extent, hausdorff};
use crate::featselect::{consensus_select, lasso_select, stratified_partitions_with, SelectionReport, Split};
use crate::io::{read_mask, read_volume, ManifestRow, PredictionRow};
use crate::radiomics::{extract_patient_features, minmax_apply, minmax_fit, PatientMasks};
use crate::staging::{train_hierarchical, HierarchicalModel, Outcome, DECEASED, SEVERE};
use crate::table::{FeatureRow, FeatureTable};
use crate::volume::{clip_hu, resample_isotropic, resample_mask, Interpolation, Mask, MaskRole, Volume};

/// Clip, then resample the volume (cubic) and masks (nearest) to isotropic spacing.
pub fn preprocess(v: &Volume, masks: &PatientMasks, target_mm: f64) -> Result<(Volume, PatientMasks)> {
    let v = resample_isotropic(&clip_hu(v), target_mm, Interpolation::Cubic)?;
    let r = |m: &Mask| resample_mask(m, target_mm);
    Ok((
        v,
        PatientMasks {
            lung_left: r(&masks.lung_left)?,
            lung_right: r(&masks.lung_right)?,
            disease: masks.disease.as_ref().map(r).transpose()?,
            heart: masks.heart.as_ref().map(r).transpose()?,
        },
    ))
}

pub fn load_patient(row: &ManifestRow) -> Result<(Volume, PatientMasks)> {
    let v = read_volume(&row.volume)?;
    let masks = PatientMasks {
        lung_left: read_mask(&row.lung_left, MaskRole::LungLeft)?,
        lung_right: read_mask(&row.lung_right, MaskRole::LungRight)?,
        disease: row.disease.as_deref().map(|p| read_mask(p, MaskRole::Disease)).transpose()?,
        heart: row.heart.as_deref().map(|p| read_mask(p, MaskRole::Heart)).transpose()?,
    };
    Ok((v, masks))
}

pub fn extract_row(row: &ManifestRow, config: &RunConfig) -> Result<(Vec<String>, FeatureRow)> {
    let (v, masks) = load_patient(row)?;
    let (v, masks) = preprocess(&v, &masks, config.target_spacing_mm)?;
    let f = extract_patient_features(&v, &masks, row.age, row.male, &config.extraction())?;
    Ok((
        f.names,
        FeatureRow {
            patient_id: row.patient_id.clone(),
            values: f.values,
            outcome: row.outcome,
        },
    ))
}

#[derive(Debug)]
pub struct RowFailure {
    pub patient_id: String,
    pub error: Error,
}

/// Extracts every manifest row in parallel; rows keep manifest order. Failed
/// rows are reported and left out of the table.
pub fn extract_features(rows: &[ManifestRow], config: &RunConfig) -> Result<(FeatureTable, Vec<RowFailure>)> {
    config.validate()?;
    let results: Vec<Result<(Vec<String>, FeatureRow)>> =
        rows.par_iter().map(|r| extract_row(r, config)).collect();
    let mut table = FeatureTable::new(crate::radiomics::feature_names());
    let mut failures = Vec::new();
    for (row, res) in rows.iter().zip(results) {
        match res {
            Ok((names, fr)) => {
                debug_assert_eq!(names, table.names);
                table.push(fr)?;
            }
            Err(error) => failures.push(RowFailure {
                patient_id: row.patient_id.clone(),
                error,
            }),
        }
    }
    Ok((table, failures))
}

fn binary_targets(outcomes: &[Outcome], rows: &[usize], severe_only: bool) -> (Vec<usize>, Vec<f64>) {
    let keep: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&i| !severe_only || outcomes[i].is_severe())
        .collect();
    let y = keep
        .iter()
        .map(|&i| {
            if severe_only {
                (outcomes[i] == Outcome::Deceased) as u8 as f64
            } else {
                outcomes[i].is_severe() as u8 as f64
            }
        })
        .collect();
    (keep, y)
}

/// Lasso selections for one split: the union of the severity task (all
/// rows) and the death task (severe rows), on features min-max scaled with
/// the split's training rows.
pub fn split_selection(table: &FeatureTable, outcomes: &[Outcome], split: &Split) -> Result<Vec<String>> {
    let norm = minmax_fit(&table.subset(&split.train));
    let scaled = minmax_apply(table, &norm)?;
    let x = scaled.matrix();
    let mut chosen = std::collections::BTreeSet::new();
    for severe_only in [false, true] {
        let (tr, y_tr) = binary_targets(outcomes, &split.train, severe_only);
        let (va, y_va) = binary_targets(outcomes, &split.validation, severe_only);
        if tr.len() < 2 || va.is_empty() {
            continue;
        }
        chosen.extend(lasso_select(&x.rows(&tr), &y_tr, &x.rows(&va), &y_va)?);
    }
    Ok(chosen.into_iter().collect())
}

/// Consensus selection over stratified splits of the labeled table.
pub fn select_features(table: &FeatureTable, config: &RunConfig) -> Result<SelectionReport> {
    config.validate()?;
    let outcomes = table.outcomes()?;
    let labels: Vec<u8> = outcomes.iter().map(|o| o.code()).collect();
    let parts = stratified_partitions_with(&labels, config.n_splits, config.train_fraction, config.seed)?;
    let per_split: Vec<Vec<String>> = parts
        .splits
        .par_iter()
        .map(|s| split_selection(table, &outcomes, s))
        .collect::<Result<_>>()?;
    let mut report = consensus_select(&per_split, config.cutoff_fraction)?;
    report.seed = Some(config.seed);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedEnsemble {
    pub model: HierarchicalModel,
    pub screen: ScreenReport,
    /// True when no method passed screening and the default seven were used.
    pub fallback: bool,
}

/// Screens the thirteen methods on the severity task, then trains the
/// hierarchical ensemble on the retained ones.
pub fn train(table: &FeatureTable, selection: &SelectionReport, config: &RunConfig) -> Result<TrainedEnsemble> {
    config.validate()?;
    let outcomes = table.outcomes()?;
    let labels: Vec<u8> = outcomes.iter().map(|o| o.code()).collect();
    let parts = stratified_partitions_with(&labels, config.n_splits, config.train_fraction, config.seed)?;
    let x = table.select(&selection.selected)?;
    let y1: Vec<Label> = outcomes.iter().map(|o| o.is_severe() as Label).collect();
    let screen = method_screen(
        &ClassifierSpec::all_thirteen(),
        &parts,
        &x,
        &y1,
        config.seed,
        &config.screening,
    )?;
    let mut specs = screen.retained();
    let fallback = specs.is_empty();
    if fallback {
        log::warn!("no classifier passed screening; using the default seven");
        specs = ClassifierSpec::retained_seven();
    }
    let model = train_hierarchical(table, &selection.selected, &specs, config.seed, config.mode)?;
    Ok(TrainedEnsemble {
        model,
        screen,
        fallback,
    })
}

pub fn predict(model: &HierarchicalModel, table: &FeatureTable) -> Result<Vec<PredictionRow>> {
    let detail = model.predict_detailed(table)?;
    Ok(table
        .rows
        .iter()
        .zip(detail)
        .map(|(row, d)| {
            let severe = crate::staging::vote(&d.stage1_votes, SEVERE).map(|l| l == SEVERE).unwrap_or(false);
            let deceased = crate::staging::vote(&d.stage2_votes, DECEASED)
                .map(|l| l == DECEASED)
                .unwrap_or(false);
            PredictionRow {
                patient_id: row.patient_id.clone(),
                outcome: Some(d.outcome(model.mode)),
                hierarchical: Some(d.hierarchical),
                ovr: Some(d.ovr),
                severe: Some(severe),
                deceased: Some(deceased),
                stage1_severe_votes: Some(d.stage1_votes.iter().filter(|&&v| v == SEVERE).count()),
                stage2_deceased_votes: Some(d.stage2_votes.iter().filter(|&&v| v == DECEASED).count()),
                ovr_votes: Some(d.ovr_counts),
            }
        })
        .collect())
}

/// Scores predictions against ground truth joined on patient id: stage 1 on
/// all rows, stage 2 on truly severe rows, and both three-class outputs.
pub fn evaluate(predictions: &[PredictionRow], truth: &[(String, Outcome)]) -> Result<Vec<(String, MetricsReport)>> {
    let truth: HashMap<&str, Outcome> = truth.iter().map(|(id, o)| (id.as_str(), *o)).collect();
    let joined: Vec<(&PredictionRow, Outcome)> = predictions
        .iter()
        .filter_map(|p| truth.get(p.patient_id.as_str()).map(|&t| (p, t)))
        .collect();
    if joined.is_empty() {
        return Err(Error::Schema("no prediction matches a labeled patient_id".into()));
    }
    let mut out = Vec::new();
    let mut score = |task: &str, pairs: Vec<(Label, Label)>, labels: Vec<Label>| -> Result<()> {
        if pairs.is_empty() {
            return Ok(());
        }
        let (t, p): (Vec<Label>, Vec<Label>) = pairs.into_iter().unzip();
        out.push((task.to_string(), metrics_from_confusion_labels(&t, &p, labels)?));
        Ok(())
    };
    let final_label = |p: &PredictionRow| p.hierarchical.or(p.outcome);
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    let mut h3 = Vec::new();
    let mut o3 = Vec::new();
    for (p, t) in &joined {
        let Some(fin) = final_label(p) else {
            return Err(Error::Schema(format!("row {}: missing column 'outcome'", p.patient_id)));
        };
        let severe = p.severe.unwrap_or(fin.is_severe());
        s1.push((t.is_severe() as Label, severe as Label));
        if t.is_severe() {
            let dec = p.deceased.unwrap_or(fin == Outcome::Deceased);
            s2.push(((*t == Outcome::Deceased) as Label, dec as Label));
        }
        h3.push((t.label(), fin.label()));
        if let Some(o) = p.ovr {
            o3.push((t.label(), o.label()));
        }
    }
    let complete_ovr = o3.len() == joined.len();
    score("stage1", s1, vec![0, 1])?;
    score("stage2", s2, vec![0, 1])?;
    score("three_class_hierarchical", h3, vec![0, 1, 2])?;
    if complete_ovr {
        score("three_class_ovr", o3, vec![0, 1, 2])?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegComparison {
    pub comparison: String,
    pub dice: f64,
    /// Undefined when either mask is empty.
    pub hausdorff_mm: Option<f64>,
    pub extent_first_pct: f64,
    pub extent_second_pct: f64,
}

/// Prediction against each reader and the readers against each other.
pub fn evaluate_segmentation(pred: &Mask, ref_a: &Mask, ref_b: &Mask, lungs: &Mask) -> Result<Vec<SegComparison>> {
    let none = Mask::empty(*lungs.geometry(), MaskRole::Other);
    let pairs = [("pred_vs_a", pred, ref_a), ("pred_vs_b", pred, ref_b), ("a_vs_b", ref_a, ref_b)];
    pairs
        .iter()
        .map(|&(name, x, y)| {
            Ok(SegComparison {
                comparison: name.into(),
                dice: dice_score(x, y)?,
                hausdorff_mm: match hausdorff(x, y) {
                    Ok(h) => Some(h),
                    Err(Error::UndefinedMetric(_)) => None,
                    Err(e) => return Err(e),
                },
                extent_first_pct: disease_extent(x, lungs, &none)?,
                extent_second_pct: disease_extent(y, lungs, &none)?,
            })
        })
        .collect()
}
