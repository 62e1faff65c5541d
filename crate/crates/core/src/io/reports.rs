use std::io::{Read, Write};

use crate::classifiers::{ConfusionMatrix, MetricsReport};
use crate::error::{Error, Result};
use crate::pipeline::SegComparison;
use crate::staging::Outcome;
use crate::table::format_f64;

/// One line of a predictions file. Only `patient_id` and `outcome` are
/// required when reading; the rest are ensemble diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionRow {
    pub patient_id: String,
    pub outcome: Option<Outcome>,
    pub hierarchical: Option<Outcome>,
    pub ovr: Option<Outcome>,
    /// Stage-1 vote result.
    pub severe: Option<bool>,
    /// Stage-2 vote result.
    pub deceased: Option<bool>,
    pub stage1_severe_votes: Option<usize>,
    pub stage2_deceased_votes: Option<usize>,
    pub ovr_votes: Option<[usize; 3]>,
}

const PRED_COLUMNS: [&str; 11] = [
    "patient_id",
    "outcome",
    "hierarchical_outcome",
    "ovr_outcome",
    "severe",
    "deceased",
    "stage1_severe_votes",
    "stage2_deceased_votes",
    "ovr_non_severe_votes",
    "ovr_intubated_votes",
    "ovr_deceased_votes",
];

fn lf_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_predictions<W: Write>(rows: &[PredictionRow], writer: W) -> Result<()> {
    let mut w = lf_writer(writer);
    w.write_record(PRED_COLUMNS)?;
    for r in rows {
        let ovr = r.ovr_votes;
        w.write_record([
            r.patient_id.clone(),
            opt(r.outcome.map(Outcome::code)),
            opt(r.hierarchical.map(Outcome::code)),
            opt(r.ovr.map(Outcome::code)),
            opt(r.severe.map(|b| b as u8)),
            opt(r.deceased.map(|b| b as u8)),
            opt(r.stage1_severe_votes),
            opt(r.stage2_deceased_votes),
            opt(ovr.map(|c| c[0])),
            opt(ovr.map(|c| c[1])),
            opt(ovr.map(|c| c[2])),
        ])?;
    }
    w.flush()?;
    Ok(())
}

struct Columns {
    names: Vec<String>,
}

impl Columns {
    fn find(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.find(name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    }
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, col: Option<usize>, name: &str) -> Result<Option<T>> {
    let Some(c) = col else { return Ok(None) };
    let s = rec.get(c).unwrap_or("").trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Schema(format!("column '{name}': cannot parse '{s}'")))
}

fn parse_outcome(rec: &csv::StringRecord, col: Option<usize>, name: &str) -> Result<Option<Outcome>> {
    match col {
        None => Ok(None),
        Some(c) => Outcome::parse_optional(rec.get(c).unwrap_or(""))
            .map_err(|e| Error::Schema(format!("column '{name}': {e}"))),
    }
}

pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<PredictionRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let cols = Columns {
        names: r.headers()?.iter().map(|s| s.trim().to_string()).collect(),
    };
    let id = cols.require("patient_id")?;
    let out = cols.require("outcome")?;
    let c = |n: &str| cols.find(n);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let flag = |name: &str| -> Result<Option<bool>> {
            Ok(parse_field::<u8>(&rec, c(name), name)?.map(|v| v != 0))
        };
        let votes = [
            parse_field::<usize>(&rec, c("ovr_non_severe_votes"), "ovr_non_severe_votes")?,
            parse_field::<usize>(&rec, c("ovr_intubated_votes"), "ovr_intubated_votes")?,
            parse_field::<usize>(&rec, c("ovr_deceased_votes"), "ovr_deceased_votes")?,
        ];
        rows.push(PredictionRow {
            patient_id: rec.get(id).unwrap_or("").trim().to_string(),
            outcome: parse_outcome(&rec, Some(out), "outcome")?,
            hierarchical: parse_outcome(&rec, c("hierarchical_outcome"), "hierarchical_outcome")?,
            ovr: parse_outcome(&rec, c("ovr_outcome"), "ovr_outcome")?,
            severe: flag("severe")?,
            deceased: flag("deceased")?,
            stage1_severe_votes: parse_field(&rec, c("stage1_severe_votes"), "stage1_severe_votes")?,
            stage2_deceased_votes: parse_field(&rec, c("stage2_deceased_votes"), "stage2_deceased_votes")?,
            ovr_votes: match votes {
                [Some(a), Some(b), Some(d)] => Some([a, b, d]),
                _ => None,
            },
        });
    }
    Ok(rows)
}

/// `(patient_id, outcome)` pairs from any CSV with those two columns
/// (feature tables, manifests, predictions). Unlabeled rows are skipped.
pub fn read_labels<R: Read>(reader: R) -> Result<Vec<(String, Outcome)>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let cols = Columns {
        names: r.headers()?.iter().map(|s| s.trim().to_string()).collect(),
    };
    let id = cols.require("patient_id")?;
    let out = cols.require("outcome")?;
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if let Some(o) = parse_outcome(&rec, Some(out), "outcome")? {
            labels.push((rec.get(id).unwrap_or("").trim().to_string(), o));
        }
    }
    Ok(labels)
}

/// `task,n,balanced_accuracy,weighted_precision,weighted_sensitivity,weighted_specificity`.
pub fn write_metrics_csv<W: Write>(rows: &[(String, MetricsReport)], writer: W) -> Result<()> {
    let mut w = lf_writer(writer);
    let mut header = vec!["task", "n"];
    header.extend(MetricsReport::NAMES);
    w.write_record(&header)?;
    for (task, m) in rows {
        let mut rec = vec![task.clone(), m.confusion.total().to_string()];
        rec.extend(m.values().iter().map(|v| format_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: `task,true,predicted,count`, every cell of every matrix.
pub fn write_confusion_csv<W: Write>(rows: &[(String, ConfusionMatrix)], writer: W) -> Result<()> {
    let mut w = lf_writer(writer);
    w.write_record(["task", "true", "predicted", "count"])?;
    for (task, cm) in rows {
        for (i, t) in cm.labels.iter().enumerate() {
            for (j, p) in cm.labels.iter().enumerate() {
                w.write_record([task.clone(), t.to_string(), p.to_string(), cm.counts[i][j].to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `comparison,dice,hausdorff_mm,extent_first_pct,extent_second_pct`; an
/// undefined distance is left blank.
pub fn write_seg_csv<W: Write>(rows: &[SegComparison], writer: W) -> Result<()> {
    let mut w = lf_writer(writer);
    w.write_record(["comparison", "dice", "hausdorff_mm", "extent_first_pct", "extent_second_pct"])?;
    for r in rows {
        w.write_record([
            r.comparison.clone(),
            format_f64(r.dice),
            r.hausdorff_mm.map(format_f64).unwrap_or_default(),
            format_f64(r.extent_first_pct),
            format_f64(r.extent_second_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}
