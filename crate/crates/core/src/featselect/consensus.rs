use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CUTOFF: f64 = 0.25;

/// Clinical covariates kept regardless of how often they were selected.
pub const FORCED_IN: [&str; 2] = ["age", "gender"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Number of splits selecting each feature.
    pub prevalence: BTreeMap<String, usize>,
    pub cutoff_fraction: f64,
    pub n_splits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub forced_in: Vec<String>,
    /// Sorted by name.
    pub selected: Vec<String>,
}

impl SelectionReport {
    pub fn prevalence_fraction(&self, name: &str) -> f64 {
        self.prevalence.get(name).copied().unwrap_or(0) as f64 / self.n_splits as f64
    }
}

/// Keeps features selected in at least `cutoff · n_splits` of the splits,
/// plus the forced-in names.
pub fn consensus_select(selections: &[Vec<String>], cutoff_fraction: f64) -> Result<SelectionReport> {
    if selections.is_empty() {
        return Err(Error::invalid("no per-split selections"));
    }
    if !(cutoff_fraction > 0.0 && cutoff_fraction <= 1.0) {
        return Err(Error::invalid(format!("cutoff must be in (0, 1], got {cutoff_fraction}")));
    }
    let n_splits = selections.len();
    let mut prevalence: BTreeMap<String, usize> = BTreeMap::new();
    for split in selections {
        let unique: BTreeSet<&String> = split.iter().collect();
        for name in unique {
            *prevalence.entry(name.clone()).or_default() += 1;
        }
    }
    let mut selected: BTreeSet<String> = prevalence
        .iter()
        .filter(|(_, &c)| c as f64 / n_splits as f64 >= cutoff_fraction - 1e-12)
        .map(|(n, _)| n.clone())
        .collect();
    let forced_in: Vec<String> = FORCED_IN.iter().map(|s| s.to_string()).collect();
    selected.extend(forced_in.iter().cloned());
    Ok(SelectionReport {
        prevalence,
        cutoff_fraction,
        n_splits,
        seed: None,
        forced_in,
        selected: selected.into_iter().collect(),
    })
}
