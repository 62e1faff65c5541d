//! Two-stage outcome prediction: a severe/non-severe vote, then an
//! intubated/deceased vote on the rows voted severe. A one-vs-rest vote over
//! the three outcomes is trained alongside.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::metrics_from_confusion_labels;
use crate::classifiers::{fit, ClassifierSpec, FittedModel, Label, MetricsReport};
use crate::error::{Error, Result};
use crate::numeric::derive_seed;
use crate::radiomics::NormParams;
use crate::table::{FeatureMatrix, FeatureTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    NonSevere = 0,
    Intubated = 1,
    Deceased = 2,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::NonSevere, Outcome::Intubated, Outcome::Deceased];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn label(self) -> Label {
        self as Label
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Outcome::NonSevere),
            1 => Ok(Outcome::Intubated),
            2 => Ok(Outcome::Deceased),
            _ => Err(Error::Schema(format!("outcome must be 0, 1 or 2, got {code}"))),
        }
    }

    /// Parses `0`/`1`/`2`; blank means unlabeled.
    pub fn parse_optional(s: &str) -> Result<Option<Self>> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(None);
        }
        let code: u8 = s
            .parse()
            .map_err(|_| Error::Schema(format!("outcome must be 0, 1, 2 or blank, got '{s}'")))?;
        Self::from_code(code).map(Some)
    }

    pub fn is_severe(self) -> bool {
        self != Outcome::NonSevere
    }

    pub fn name(self) -> &'static str {
        match self {
            Outcome::NonSevere => "non_severe",
            Outcome::Intubated => "intubated",
            Outcome::Deceased => "deceased",
        }
    }
}

/// Binary encoding of stage 1: severe = 1.
pub const SEVERE: Label = 1;
/// Binary encoding of stage 2: deceased = 1.
pub const DECEASED: Label = 1;

/// Modal label of the voters; ties among the top labels go to `tie_break`
/// when it is one of them, otherwise to the smallest tied label.
pub fn vote(labels: &[Label], tie_break: Label) -> Result<Label> {
    if labels.is_empty() {
        return Err(Error::invalid("cannot vote without voters"));
    }
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let top = *counts.values().max().unwrap();
    let tied: Vec<Label> = counts.iter().filter(|(_, &c)| c == top).map(|(&l, _)| l).collect();
    Ok(if tied.contains(&tie_break) { tie_break } else { tied[0] })
}

/// Final label from the two stages' votes. Stage-2 votes are only consulted
/// when stage 1 votes severe.
pub fn combine_votes(stage1: &[Label], stage2: Option<&[Label]>) -> Result<Outcome> {
    if vote(stage1, SEVERE)? != SEVERE {
        return Ok(Outcome::NonSevere);
    }
    let s2 = stage2.ok_or_else(|| Error::invalid("severe row without stage-2 votes"))?;
    Ok(if vote(s2, DECEASED)? == DECEASED {
        Outcome::Deceased
    } else {
        Outcome::Intubated
    })
}

/// Argmax of one-vs-rest positive vote counts, ties broken towards the more
/// severe outcome.
pub fn ovr_decision(counts: [usize; 3]) -> Outcome {
    let mut best = Outcome::Deceased;
    for o in [Outcome::Intubated, Outcome::NonSevere] {
        if counts[o as usize] > counts[best as usize] {
            best = o;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    #[default]
    Hierarchical,
    OvrVote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalModel {
    pub selected_features: Vec<String>,
    pub norm: NormParams,
    /// Severe vs non-severe on every training row.
    pub stage1: Vec<FittedModel>,
    /// Deceased vs intubated on the truly severe training rows.
    pub stage2: Vec<FittedModel>,
    /// One block per outcome, in outcome order: that outcome vs the rest.
    pub ovr: Vec<Vec<FittedModel>>,
    pub mode: EnsembleMode,
    pub seed: u64,
}

/// Per-row detail of an ensemble prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowPrediction {
    pub stage1_votes: Vec<Label>,
    /// Stage-2 votes are reported for every row so the second stage can be
    /// scored on its own; they only shape the outcome of rows voted severe.
    pub stage2_votes: Vec<Label>,
    pub hierarchical: Outcome,
    pub ovr_counts: [usize; 3],
    pub ovr: Outcome,
}

impl RowPrediction {
    pub fn outcome(&self, mode: EnsembleMode) -> Outcome {
        match mode {
            EnsembleMode::Hierarchical => self.hierarchical,
            EnsembleMode::OvrVote => self.ovr,
        }
    }
}

fn fit_block(
    specs: &[ClassifierSpec],
    x: &FeatureMatrix,
    y: &[Label],
    seed: u64,
    block: u64,
) -> Result<Vec<FittedModel>> {
    specs
        .par_iter()
        .enumerate()
        .map(|(i, s)| fit(s, x, y, derive_seed(seed, block * 1000 + i as u64)))
        .collect()
}

/// Trains both stages and the one-vs-rest blocks on min-max scaled features.
pub fn train_hierarchical(
    table: &FeatureTable,
    selected: &[String],
    specs: &[ClassifierSpec],
    seed: u64,
    mode: EnsembleMode,
) -> Result<HierarchicalModel> {
    if specs.is_empty() {
        return Err(Error::invalid("no classifier specs to train"));
    }
    let outcomes = table.outcomes()?;
    for o in Outcome::ALL {
        if !outcomes.contains(&o) {
            return Err(Error::invalid(format!("training data has no '{}' rows", o.name())));
        }
    }
    let raw = table.select(selected)?;
    let norm = NormParams::fit_matrix(&raw);
    let x = norm.apply_matrix(&raw)?;

    let y1: Vec<Label> = outcomes.iter().map(|o| o.is_severe() as Label).collect();
    let stage1 = fit_block(specs, &x, &y1, seed, 1)?;

    let severe_rows: Vec<usize> = (0..outcomes.len()).filter(|&i| outcomes[i].is_severe()).collect();
    let y2: Vec<Label> = severe_rows
        .iter()
        .map(|&i| (outcomes[i] == Outcome::Deceased) as Label)
        .collect();
    let stage2 = fit_block(specs, &x.rows(&severe_rows), &y2, seed, 2)?;

    let ovr = Outcome::ALL
        .iter()
        .map(|&c| {
            let y: Vec<Label> = outcomes.iter().map(|&o| (o == c) as Label).collect();
            fit_block(specs, &x, &y, seed, 3 + c as u64)
        })
        .collect::<Result<_>>()?;

    Ok(HierarchicalModel {
        selected_features: selected.to_vec(),
        norm,
        stage1,
        stage2,
        ovr,
        mode,
        seed,
    })
}

impl HierarchicalModel {
    /// Selects and scales the model's columns from a feature table.
    pub fn prepare(&self, table: &FeatureTable) -> Result<FeatureMatrix> {
        self.norm.apply_matrix(&table.select(&self.selected_features)?)
    }

    pub fn predict_detailed(&self, table: &FeatureTable) -> Result<Vec<RowPrediction>> {
        let x = self.prepare(table)?;
        let n = x.nrows();
        let s1: Vec<Vec<Label>> = self.stage1.iter().map(|m| m.predict(&x)).collect::<Result<_>>()?;
        let s2: Vec<Vec<Label>> = self.stage2.iter().map(|m| m.predict(&x)).collect::<Result<_>>()?;
        let ovr: Vec<Vec<Vec<Label>>> = self
            .ovr
            .iter()
            .map(|block| block.iter().map(|m| m.predict(&x)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let stage1_votes: Vec<Label> = s1.iter().map(|v| v[i]).collect();
            let stage2_votes: Vec<Label> = s2.iter().map(|v| v[i]).collect();
            let hierarchical = combine_votes(&stage1_votes, Some(&stage2_votes))?;
            let mut ovr_counts = [0usize; 3];
            for (c, block) in ovr.iter().enumerate() {
                ovr_counts[c] = block.iter().filter(|v| v[i] == 1).count();
            }
            out.push(RowPrediction {
                stage1_votes,
                stage2_votes,
                hierarchical,
                ovr_counts,
                ovr: ovr_decision(ovr_counts),
            });
        }
        Ok(out)
    }

    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<Outcome>> {
        Ok(self.predict_detailed(table)?.iter().map(|r| r.outcome(self.mode)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn predict_hierarchical(model: &HierarchicalModel, table: &FeatureTable) -> Result<Vec<Outcome>> {
    Ok(model.predict_detailed(table)?.iter().map(|r| r.hierarchical).collect())
}

pub fn predict_ovr(model: &HierarchicalModel, table: &FeatureTable) -> Result<Vec<Outcome>> {
    Ok(model.predict_detailed(table)?.iter().map(|r| r.ovr).collect())
}

/// Three-class metrics with a full 3×3 confusion table in outcome order.
pub fn evaluate_three_class(y_true: &[Outcome], y_pred: &[Outcome]) -> Result<MetricsReport> {
    let t: Vec<Label> = y_true.iter().map(|o| o.label()).collect();
    let p: Vec<Label> = y_pred.iter().map(|o| o.label()).collect();
    metrics_from_confusion_labels(&t, &p, vec![0, 1, 2])
}
