use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Label;
use crate::error::{Error, Result};

/// Rows are true labels, columns predicted labels, both in `labels` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<Label>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(y_true: &[Label], y_pred: &[Label]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::invalid(format!(
                "{} true labels but {} predictions",
                y_true.len(),
                y_pred.len()
            )));
        }
        let labels: Vec<Label> = y_true.iter().chain(y_pred).copied().collect::<BTreeSet<_>>().into_iter().collect();
        Ok(Self::with_labels(y_true, y_pred, labels))
    }

    /// Uses a fixed label order; pairs with labels outside it are ignored.
    pub fn with_labels(y_true: &[Label], y_pred: &[Label], labels: Vec<Label>) -> Self {
        let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
        for (t, p) in y_true.iter().zip(y_pred) {
            if let (Ok(i), Ok(j)) = (labels.binary_search(t), labels.binary_search(p)) {
                counts[i][j] += 1;
            }
        }
        Self { labels, counts }
    }

    pub fn support(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub balanced_accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_sensitivity: f64,
    pub weighted_specificity: f64,
    pub confusion: ConfusionMatrix,
    /// Set when some per-class term had a zero denominator and counted as 0.
    pub zero_division: bool,
}

impl MetricsReport {
    pub const NAMES: [&'static str; 4] = [
        "balanced_accuracy",
        "weighted_precision",
        "weighted_sensitivity",
        "weighted_specificity",
    ];

    pub fn values(&self) -> [f64; 4] {
        [
            self.balanced_accuracy,
            self.weighted_precision,
            self.weighted_sensitivity,
            self.weighted_specificity,
        ]
    }
}

/// Balanced accuracy is the mean recall over classes present in `y_true`;
/// the weighted metrics average per-class values by true support.
pub fn classification_metrics(y_true: &[Label], y_pred: &[Label]) -> Result<MetricsReport> {
    let cm = ConfusionMatrix::new(y_true, y_pred)?;
    if y_true.is_empty() {
        return Err(Error::invalid("no samples to score"));
    }
    Ok(metrics_from_confusion(cm))
}

/// Metrics over a fixed label order (labels absent from the truth are
/// skipped in the averages).
pub fn metrics_from_confusion_labels(
    y_true: &[Label],
    y_pred: &[Label],
    labels: Vec<Label>,
) -> Result<MetricsReport> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::invalid("need equally many true and predicted labels, at least one"));
    }
    if let Some(l) = y_true.iter().chain(y_pred).find(|l| labels.binary_search(l).is_err()) {
        return Err(Error::invalid(format!("label {l} is outside {labels:?}")));
    }
    Ok(metrics_from_confusion(ConfusionMatrix::with_labels(y_true, y_pred, labels)))
}

pub(crate) fn metrics_from_confusion(cm: ConfusionMatrix) -> MetricsReport {
    let k = cm.labels.len();
    let n = cm.total() as f64;
    let mut zero_division = false;
    let ratio = |num: u64, den: u64, flag: &mut bool| {
        if den == 0 {
            *flag = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let (mut ba, mut present) = (0.0, 0usize);
    let (mut wp, mut ws, mut wsp) = (0.0, 0.0, 0.0);
    for i in 0..k {
        let support = cm.support(i);
        let tp = cm.counts[i][i];
        let predicted: u64 = (0..k).map(|r| cm.counts[r][i]).sum();
        let fp = predicted - tp;
        let tn = cm.total() - support - fp;
        if support == 0 {
            continue;
        }
        let weight = support as f64 / n;
        let recall = tp as f64 / support as f64;
        ba += recall;
        present += 1;
        ws += weight * recall;
        wp += weight * ratio(tp, predicted, &mut zero_division);
        wsp += weight * ratio(tn, tn + fp, &mut zero_division);
    }
    MetricsReport {
        balanced_accuracy: ba / present as f64,
        weighted_precision: wp,
        weighted_sensitivity: ws,
        weighted_specificity: wsp,
        confusion: cm,
        zero_division,
    }
}
