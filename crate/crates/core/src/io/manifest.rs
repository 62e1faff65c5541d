use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::staging::Outcome;

const COLUMNS: [&str; 9] = [
    "patient_id",
    "volume",
    "lung_left",
    "lung_right",
    "disease",
    "heart",
    "age",
    "gender",
    "outcome",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub patient_id: String,
    pub volume: PathBuf,
    pub lung_left: PathBuf,
    pub lung_right: PathBuf,
    /// Blank in the CSV means no disease was delineated.
    pub disease: Option<PathBuf>,
    pub heart: Option<PathBuf>,
    pub age: f64,
    pub male: bool,
    pub outcome: Option<Outcome>,
}

impl ManifestRow {
    pub fn files(&self) -> Vec<&Path> {
        let mut f = vec![self.volume.as_path(), &self.lung_left, &self.lung_right];
        f.extend(self.disease.as_deref());
        f.extend(self.heart.as_deref());
        f
    }
}

/// Cohort manifest. Leading `#` lines are free-form metadata; file paths are
/// stored relative to the manifest and resolved on load.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub comments: Vec<String>,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    /// Files referenced by each row that do not exist.
    pub fn missing_files(&self) -> Vec<(String, PathBuf)> {
        self.rows
            .iter()
            .flat_map(|r| {
                r.files()
                    .into_iter()
                    .filter(|p| !p.exists())
                    .map(move |p| (r.patient_id.clone(), p.to_path_buf()))
            })
            .collect()
    }
}

fn parse_gender(s: &str) -> Option<bool> {
    match s.trim() {
        "M" | "m" | "1" => Some(true),
        "F" | "f" | "0" => Some(false),
        _ => None,
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = super::read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let comments: Vec<String> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim().to_string())
        .collect();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("manifest is missing column '{name}'")))
    };
    let idx: Vec<usize> = COLUMNS.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |k: usize| rec.get(idx[k]).unwrap_or("").trim();
        let id = get(0).to_string();
        if id.is_empty() {
            return Err(Error::Schema(format!("manifest row {} has an empty patient_id", line + 1)));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::Schema(format!("duplicate patient_id '{id}'")));
        }
        let required = |k: usize| -> Result<PathBuf> {
            let v = get(k);
            if v.is_empty() {
                Err(Error::Schema(format!("row {id}: column '{}' is required", COLUMNS[k])))
            } else {
                Ok(base.join(v))
            }
        };
        let optional = |k: usize| (!get(k).is_empty()).then(|| base.join(get(k)));
        let age: f64 = get(6)
            .parse()
            .ok()
            .filter(|a: &f64| a.is_finite())
            .ok_or_else(|| Error::Schema(format!("row {id}: column 'age' must be a number")))?;
        let male = parse_gender(get(7))
            .ok_or_else(|| Error::Schema(format!("row {id}: column 'gender' must be M/F or 1/0")))?;
        let outcome = Outcome::parse_optional(get(8))
            .map_err(|e| Error::Schema(format!("row {id}: column 'outcome': {e}")))?;
        rows.push(ManifestRow {
            volume: required(1)?,
            lung_left: required(2)?,
            lung_right: required(3)?,
            disease: optional(4),
            heart: optional(5),
            patient_id: id,
            age,
            male,
            outcome,
        });
    }
    Ok(Manifest { comments, rows })
}

fn relative(p: &Path, base: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().into_owned()
}

/// Writes paths relative to the manifest directory when possible.
pub fn write_manifest(path: &Path, m: &Manifest) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = String::new();
    for c in &m.comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in &m.rows {
        w.write_record([
            r.patient_id.clone(),
            relative(&r.volume, base),
            relative(&r.lung_left, base),
            relative(&r.lung_right, base),
            r.disease.as_deref().map(|p| relative(p, base)).unwrap_or_default(),
            r.heart.as_deref().map(|p| relative(p, base)).unwrap_or_default(),
            format!("{}", r.age),
            if r.male { "M" } else { "F" }.to_string(),
            r.outcome.map(|o| o.code().to_string()).unwrap_or_default(),
        ])?;
    }
    out.push_str(&String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf8"));
    fs::write(path, out)?;
    Ok(())
}
