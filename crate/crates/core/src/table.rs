//! Per-patient feature tables and the named feature matrices handed to
//! classifiers.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::staging::Outcome;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub patient_id: String,
    pub values: Vec<f64>,
    pub outcome: Option<Outcome>,
}

/// Feature values per patient with a shared, ordered list of column names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: FeatureRow) -> Result<()> {
        if row.values.len() != self.names.len() {
            return Err(Error::Schema(format!(
                "row {} has {} values for {} columns",
                row.patient_id,
                row.values.len(),
                self.names.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r.values[j]).collect())
    }

    /// Outcome labels of every row; errors if any row is unlabeled.
    pub fn outcomes(&self) -> Result<Vec<Outcome>> {
        self.rows
            .iter()
            .map(|r| {
                r.outcome.ok_or_else(|| {
                    Error::Schema(format!("row {} has no outcome", r.patient_id))
                })
            })
            .collect()
    }

    pub fn subset(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Named matrix of the requested columns, in the requested order.
    pub fn select(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<_>>()?;
        let values = Array2::from_shape_fn((self.rows.len(), idx.len()), |(i, j)| {
            self.rows[i].values[idx[j]]
        });
        Ok(FeatureMatrix {
            names: names.to_vec(),
            values,
        })
    }

    pub fn matrix(&self) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            values: Array2::from_shape_fn((self.rows.len(), self.names.len()), |(i, j)| {
                self.rows[i].values[j]
            }),
        }
    }

    /// Writes `patient_id,<features...>,outcome` with shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let mut header = vec!["patient_id".to_string()];
        header.extend(self.names.iter().cloned());
        header.push("outcome".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = Vec::with_capacity(row.values.len() + 2);
            rec.push(row.patient_id.clone());
            rec.extend(row.values.iter().map(|v| format_f64(*v)));
            rec.push(row.outcome.map(|o| o.code().to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0) != Some("patient_id") {
            return Err(Error::Schema("first column must be 'patient_id'".into()));
        }
        let last = header.len() - 1;
        if header.len() < 2 || header.get(last) != Some("outcome") {
            return Err(Error::Schema("last column must be 'outcome'".into()));
        }
        let names: Vec<String> = header.iter().skip(1).take(last - 1).map(String::from).collect();
        let mut table = FeatureTable::new(names);
        for rec in r.records() {
            let rec = rec?;
            let patient_id = rec.get(0).unwrap_or_default().to_string();
            let mut values = Vec::with_capacity(last - 1);
            for j in 1..last {
                let raw = rec.get(j).unwrap_or_default();
                let v: f64 = raw.trim().parse().map_err(|_| {
                    Error::Schema(format!(
                        "column '{}' of row {patient_id}: cannot parse '{raw}'",
                        table.names[j - 1]
                    ))
                })?;
                values.push(v);
            }
            let outcome = Outcome::parse_optional(rec.get(last).unwrap_or_default())?;
            table.push(FeatureRow {
                patient_id,
                values,
                outcome,
            })?;
        }
        Ok(table)
    }
}

/// Rust's `Display` for `f64` is the shortest string that parses back to the
/// same value.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// A dense samples × features matrix with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::invalid(format!(
                "{} names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        Ok(Self { names, values })
    }

    /// Unnamed columns `f0, f1, ...`; handy for synthetic data.
    pub fn anonymous(values: Array2<f64>) -> Self {
        let names = (0..values.ncols()).map(|j| format!("f{j}")).collect();
        Self { names, values }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            values: self.values.select(ndarray::Axis(0), idx),
        }
    }
}
