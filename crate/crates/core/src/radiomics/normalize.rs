use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{FeatureMatrix, FeatureTable};

/// Per-column minimum and maximum observed on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormParams {
    /// `(x - min) / (max - min)`, or 0 for a constant training column.
    /// Values outside the training range are not clamped.
    pub fn scale(&self, column: usize, x: f64) -> f64 {
        let span = self.max[column] - self.min[column];
        if span > 0.0 {
            (x - self.min[column]) / span
        } else {
            0.0
        }
    }
}

impl NormParams {
    pub fn fit_matrix(m: &FeatureMatrix) -> Self {
        let mut min = vec![0.0; m.ncols()];
        let mut max = vec![0.0; m.ncols()];
        for (j, col) in m.values.columns().into_iter().enumerate() {
            if m.nrows() > 0 {
                min[j] = col.iter().copied().fold(f64::INFINITY, f64::min);
                max[j] = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
        }
        Self {
            names: m.names.clone(),
            min,
            max,
        }
    }

    /// The matrix must carry exactly the fitted columns, in order.
    pub fn apply_matrix(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.names != self.names {
            return Err(Error::FeatureMismatch {
                expected: self.names.clone(),
                found: m.names.clone(),
            });
        }
        let mut out = m.clone();
        for (j, mut col) in out.values.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|x| self.scale(j, x));
        }
        Ok(out)
    }
}

pub fn minmax_fit(table: &FeatureTable) -> NormParams {
    let p = table.names.len();
    let mut min = vec![f64::INFINITY; p];
    let mut max = vec![f64::NEG_INFINITY; p];
    for row in &table.rows {
        for (j, &v) in row.values.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    if table.rows.is_empty() {
        min.fill(0.0);
        max.fill(0.0);
    }
    NormParams {
        names: table.names.clone(),
        min,
        max,
    }
}

/// Applies fitted parameters by column name; columns without parameters are
/// left untouched, parameters without a column are an error.
pub fn minmax_apply(table: &FeatureTable, params: &NormParams) -> Result<FeatureTable> {
    let idx: Vec<usize> = params
        .names
        .iter()
        .map(|n| table.column_index(n))
        .collect::<Result<_>>()?;
    let mut out = table.clone();
    for row in &mut out.rows {
        for (k, &j) in idx.iter().enumerate() {
            row.values[j] = params.scale(k, row.values[j]);
        }
    }
    Ok(out)
}
