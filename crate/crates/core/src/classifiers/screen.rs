use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{classification_metrics, fit, ClassifierSpec, Label, MetricsReport};
use crate::error::Result;
use crate::featselect::PartitionScheme;
use crate::numeric::{derive_seed, mean, std_dev};
use crate::radiomics::NormParams;
use crate::table::{format_f64, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapRule {
    /// `train − validation`.
    Absolute,
    /// `(train − validation) / train`.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenThresholds {
    pub min_validation_ba: f64,
    pub max_gap: f64,
    pub gap_rule: GapRule,
}

impl Default for ScreenThresholds {
    fn default() -> Self {
        Self {
            min_validation_ba: 0.60,
            max_gap: 0.20,
            gap_rule: GapRule::Absolute,
        }
    }
}

impl ScreenThresholds {
    /// Keep a method iff validation BA exceeds the floor and the
    /// train-to-validation drop stays under the cap.
    pub fn retains(&self, train_ba: f64, validation_ba: f64) -> bool {
        let gap = match self.gap_rule {
            GapRule::Absolute => train_ba - validation_ba,
            GapRule::Relative if train_ba > 0.0 => (train_ba - validation_ba) / train_ba,
            GapRule::Relative => 0.0,
        };
        validation_ba > self.min_validation_ba && gap < self.max_gap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation over splits.
    pub sd: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: mean(values),
            sd: std_dev(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenRow {
    pub spec: ClassifierSpec,
    /// Per metric, in [`MetricsReport::NAMES`] order.
    pub train: [MetricSummary; 4],
    pub validation: [MetricSummary; 4],
    pub retained: bool,
}

impl ScreenRow {
    pub fn from_reports(
        spec: ClassifierSpec,
        train: &[MetricsReport],
        validation: &[MetricsReport],
        thresholds: &ScreenThresholds,
    ) -> Self {
        let summarise = |reports: &[MetricsReport]| -> [MetricSummary; 4] {
            std::array::from_fn(|m| {
                MetricSummary::of(&reports.iter().map(|r| r.values()[m]).collect::<Vec<_>>())
            })
        };
        let train = summarise(train);
        let validation = summarise(validation);
        let retained = thresholds.retains(train[0].mean, validation[0].mean);
        Self {
            spec,
            train,
            validation,
            retained,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub thresholds: ScreenThresholds,
    pub rows: Vec<ScreenRow>,
}

impl ScreenReport {
    pub fn retained(&self) -> Vec<ClassifierSpec> {
        self.rows.iter().filter(|r| r.retained).map(|r| r.spec.clone()).collect()
    }
}

/// Fits every spec on every split (min-max scaled on the split's training
/// rows) and applies the retention rule to the mean balanced accuracies.
pub fn method_screen(
    specs: &[ClassifierSpec],
    partitions: &PartitionScheme,
    x: &FeatureMatrix,
    y: &[Label],
    seed: u64,
    thresholds: &ScreenThresholds,
) -> Result<ScreenReport> {
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|s| (0..partitions.splits.len()).map(move |k| (s, k)))
        .collect();
    let results: Vec<(MetricsReport, MetricsReport)> = jobs
        .par_iter()
        .map(|&(s, k)| {
            let split = &partitions.splits[k];
            let train_x = x.rows(&split.train);
            let val_x = x.rows(&split.validation);
            let norm = NormParams::fit_matrix(&train_x);
            let train_x = norm.apply_matrix(&train_x)?;
            let val_x = norm.apply_matrix(&val_x)?;
            let train_y: Vec<Label> = split.train.iter().map(|&i| y[i]).collect();
            let val_y: Vec<Label> = split.validation.iter().map(|&i| y[i]).collect();
            let model = fit(&specs[s], &train_x, &train_y, derive_seed(seed, (k * specs.len() + s) as u64))?;
            Ok((
                classification_metrics(&train_y, &model.predict(&train_x)?)?,
                classification_metrics(&val_y, &model.predict(&val_x)?)?,
            ))
        })
        .collect::<Result<_>>()?;
    let n_splits = partitions.splits.len();
    let rows = specs
        .iter()
        .enumerate()
        .map(|(s, spec)| {
            let chunk = &results[s * n_splits..(s + 1) * n_splits];
            let train: Vec<MetricsReport> = chunk.iter().map(|r| r.0.clone()).collect();
            let val: Vec<MetricsReport> = chunk.iter().map(|r| r.1.clone()).collect();
            ScreenRow::from_reports(spec.clone(), &train, &val, thresholds)
        })
        .collect();
    Ok(ScreenReport {
        thresholds: *thresholds,
        rows,
    })
}

/// `spec,metric,train_mean,train_sd,validation_mean,validation_sd`.
pub fn write_screen_csv<W: Write>(report: &ScreenReport, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["spec", "metric", "train_mean", "train_sd", "validation_mean", "validation_sd"])?;
    for row in &report.rows {
        for (m, name) in MetricsReport::NAMES.iter().enumerate() {
            w.write_record([
                row.spec.name().to_string(),
                name.to_string(),
                format_f64(row.train[m].mean),
                format_f64(row.train[m].sd),
                format_f64(row.validation[m].mean),
                format_f64(row.validation[m].sd),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
