//! Seeded synthetic cohort: ellipsoidal lungs and heart inside an elliptic
//! body, soft high-attenuation blobs inside the lungs as disease, and
//! outcomes drawn from a stated rule on disease extent and age.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalmetrics::disease_extent;
use crate::io::{write_manifest, write_mask, write_volume, Manifest, ManifestRow};
use crate::numeric::derive_seed;
use crate::staging::Outcome;
use crate::volume::{Geometry, Mask, MaskRole, Volume};

/// Generator constants. Severity and death follow
///
/// * severe iff `severity_extent_coef · (extent − severity_extent_offset)
///   + severity_age_coef · (age − 60) + N(0, severity_noise_sd) > 0`
/// * among severe, deceased iff `age + death_extent_coef · extent
///   + N(0, death_noise_sd) > death_threshold`
///
/// with extent in percent of lung volume and age in years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub body_hu: f64,
    pub lung_hu: f64,
    pub heart_hu: f64,
    pub noise_hu: f64,
    pub max_blobs: usize,
    pub blob_radius_mm: [f64; 2],
    pub blob_peak_hu: [f64; 2],
    pub age_range: [f64; 2],
    pub severity_extent_coef: f64,
    pub severity_extent_offset: f64,
    pub severity_age_coef: f64,
    pub severity_noise_sd: f64,
    pub death_extent_coef: f64,
    pub death_noise_sd: f64,
    pub death_threshold: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            dims: [48, 36, 24],
            spacing_mm: [1.5, 1.5, 2.0],
            body_hu: 40.0,
            lung_hu: -860.0,
            heart_hu: 45.0,
            noise_hu: 20.0,
            max_blobs: 6,
            blob_radius_mm: [4.0, 18.0],
            blob_peak_hu: [500.0, 800.0],
            age_range: [25.0, 95.0],
            severity_extent_coef: 0.25,
            severity_extent_offset: 25.0,
            severity_age_coef: 0.05,
            severity_noise_sd: 0.5,
            death_extent_coef: 0.3,
            death_noise_sd: 3.0,
            death_threshold: 90.0,
        }
    }
}

impl SynthParams {
    /// One `key=value` line per constant, for the manifest header.
    pub fn describe(&self) -> Vec<String> {
        let v = serde_json::to_value(self).expect("serialisable");
        v.as_object()
            .expect("struct")
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthPatient {
    pub patient_id: String,
    pub volume: Volume,
    pub lung_left: Mask,
    pub lung_right: Mask,
    pub disease: Mask,
    pub heart: Mask,
    pub age: f64,
    pub male: bool,
    pub n_blobs: usize,
    pub extent_pct: f64,
    pub outcome: Outcome,
}

/// Per-patient summary stored in `cohort.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRecord {
    pub patient_id: String,
    pub age: f64,
    pub male: bool,
    pub n_blobs: usize,
    pub extent_pct: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCohort {
    pub seed: u64,
    pub params: SynthParams,
    pub patients: Vec<SynthRecord>,
}

fn in_ellipsoid(p: [f64; 3], c: [f64; 3], r: [f64; 3]) -> f64 {
    (0..3).map(|a| ((p[a] - c[a]) / r[a]).powi(2)).sum()
}

pub fn generate_patient(index: usize, seed: u64, params: &SynthParams) -> Result<SynthPatient> {
    let g = Geometry::new(params.dims, params.spacing_mm, [0.0; 3])?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index as u64));
    let ext: [f64; 3] = std::array::from_fn(|a| g.dims[a] as f64 * g.spacing_mm[a]);
    let centre = [ext[0] / 2.0, ext[1] / 2.0, ext[2] / 2.0];
    let lung_r = [ext[0] * 0.15, ext[1] * 0.31, ext[2] * 0.42];
    let left_c = [ext[0] * 0.28, centre[1], centre[2]];
    let right_c = [ext[0] * 0.72, centre[1], centre[2]];
    let heart_c = [centre[0], centre[1] + ext[1] * 0.08, centre[2] - ext[2] * 0.08];
    let heart_r = [ext[0] * 0.13, ext[1] * 0.15, ext[2] * 0.19];
    let body_r = [ext[0] * 0.47, ext[1] * 0.46];

    let pos = |i: usize| {
        let c = g.coords(i);
        [
            (c[0] as f64 + 0.5) * g.spacing_mm[0],
            (c[1] as f64 + 0.5) * g.spacing_mm[1],
            (c[2] as f64 + 0.5) * g.spacing_mm[2],
        ]
    };
    let n = g.len();
    let mut left = vec![false; n];
    let mut right = vec![false; n];
    let mut heart = vec![false; n];
    let mut body = vec![false; n];
    for i in 0..n {
        let p = pos(i);
        body[i] = ((p[0] - centre[0]) / body_r[0]).powi(2) + ((p[1] - centre[1]) / body_r[1]).powi(2) <= 1.0;
        left[i] = in_ellipsoid(p, left_c, lung_r) <= 1.0;
        right[i] = in_ellipsoid(p, right_c, lung_r) <= 1.0;
        heart[i] = !left[i] && !right[i] && in_ellipsoid(p, heart_c, heart_r) <= 1.0;
    }

    // Disease burden is driven by one latent severity draw.
    let u: f64 = rng.random();
    let n_blobs = ((u * (params.max_blobs + 1) as f64).floor() as usize).min(params.max_blobs);
    let [r_lo, r_hi] = params.blob_radius_mm;
    let mut blobs = Vec::with_capacity(n_blobs);
    for _ in 0..n_blobs {
        let c = if rng.random::<bool>() { left_c } else { right_c };
        // Uniform point in the inner 70% of the lung ellipsoid.
        let p = loop {
            let q: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            if q.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                break std::array::from_fn::<f64, 3, _>(|a| c[a] + 0.7 * q[a] * lung_r[a]);
            }
        };
        let radius = (r_lo + (r_hi - r_lo) * u) * rng.random_range(0.7..1.1);
        let peak = rng.random_range(params.blob_peak_hu[0]..params.blob_peak_hu[1]);
        blobs.push((p, radius, peak));
    }

    let noise = Normal::new(0.0, params.noise_hu).map_err(|e| Error::invalid(e.to_string()))?;
    let mut hu = vec![-1000.0; n];
    let mut disease = vec![false; n];
    for i in 0..n {
        let p = pos(i);
        let base = if left[i] || right[i] {
            params.lung_hu
        } else if heart[i] {
            params.heart_hu
        } else if body[i] {
            params.body_hu
        } else {
            -1000.0
        };
        let mut v = base;
        if left[i] || right[i] {
            for &(c, r, peak) in &blobs {
                let d2: f64 = (0..3).map(|a| (p[a] - c[a]).powi(2)).sum();
                if d2 < r * r {
                    disease[i] = true;
                    v = v.max(params.lung_hu + peak * (1.0 - d2 / (r * r)));
                }
            }
        }
        if body[i] {
            v += noise.sample(&mut rng);
        }
        hu[i] = v.round().clamp(-1024.0, 3071.0);
    }
    let lung_left = Mask::new(g, left, MaskRole::LungLeft)?;
    let lung_right = Mask::new(g, right, MaskRole::LungRight)?;
    let disease = Mask::new(g, disease, MaskRole::Disease)?;
    let extent = disease_extent(&disease, &lung_left, &lung_right)?;

    let [a_lo, a_hi] = params.age_range;
    let age = rng.random_range(a_lo..a_hi).floor();
    let male = rng.random::<bool>();
    let sev_noise = Normal::new(0.0, params.severity_noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let death_noise = Normal::new(0.0, params.death_noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let severity = params.severity_extent_coef * (extent - params.severity_extent_offset)
        + params.severity_age_coef * (age - 60.0)
        + sev_noise.sample(&mut rng);
    let death = age + params.death_extent_coef * extent + death_noise.sample(&mut rng);
    let outcome = if severity <= 0.0 {
        Outcome::NonSevere
    } else if death > params.death_threshold {
        Outcome::Deceased
    } else {
        Outcome::Intubated
    };

    Ok(SynthPatient {
        patient_id: format!("p{:04}", index + 1),
        volume: Volume::new(g, hu)?,
        lung_left,
        lung_right,
        disease,
        heart: Mask::new(g, heart, MaskRole::Heart)?,
        age,
        male,
        n_blobs,
        extent_pct: extent,
        outcome,
    })
}

/// Writes `manifest.csv`, `cohort.json` and one directory of MVOL files per
/// patient under `out_dir`.
pub fn write_cohort(out_dir: &Path, n: usize, seed: u64, params: &SynthParams) -> Result<SynthCohort> {
    if n < 50 {
        return Err(Error::invalid(format!("cohort size must be at least 50, got {n}")));
    }
    fs::create_dir_all(out_dir)?;
    let records: Vec<(SynthRecord, ManifestRow)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = generate_patient(i, seed, params)?;
            let dir = out_dir.join(&p.patient_id);
            fs::create_dir_all(&dir)?;
            let files = [
                dir.join("ct.mvol"),
                dir.join("lung_left.mvol"),
                dir.join("lung_right.mvol"),
                dir.join("disease.mvol"),
                dir.join("heart.mvol"),
            ];
            write_volume(&files[0], &p.volume)?;
            write_mask(&files[1], &p.lung_left)?;
            write_mask(&files[2], &p.lung_right)?;
            write_mask(&files[3], &p.disease)?;
            write_mask(&files[4], &p.heart)?;
            let [ct, ll, lr, d, h] = files;
            Ok((
                SynthRecord {
                    patient_id: p.patient_id.clone(),
                    age: p.age,
                    male: p.male,
                    n_blobs: p.n_blobs,
                    extent_pct: p.extent_pct,
                    outcome: p.outcome,
                },
                ManifestRow {
                    patient_id: p.patient_id,
                    volume: ct,
                    lung_left: ll,
                    lung_right: lr,
                    disease: Some(d),
                    heart: Some(h),
                    age: p.age,
                    male: p.male,
                    outcome: Some(p.outcome),
                },
            ))
        })
        .collect::<Result<_>>()?;
    let (patients, rows): (Vec<_>, Vec<_>) = records.into_iter().unzip();
    let mut comments = vec![format!("synthetic cohort n={n} seed={seed}")];
    comments.extend(params.describe());
    comments.push(format!(
        "severe iff {} * (extent_pct - {}) + {} * (age - 60) + N(0, {}^2) > 0",
        params.severity_extent_coef, params.severity_extent_offset, params.severity_age_coef, params.severity_noise_sd
    ));
    comments.push(format!(
        "deceased (among severe) iff age + {} * extent_pct + N(0, {}^2) > {}",
        params.death_extent_coef, params.death_noise_sd, params.death_threshold
    ));
    write_manifest(&out_dir.join("manifest.csv"), &Manifest { comments, rows })?;
    let cohort = SynthCohort {
        seed,
        params: params.clone(),
        patients,
    };
    let mut json = serde_json::to_string_pretty(&cohort)?;
    json.push('\n');
    fs::write(out_dir.join("cohort.json"), json)?;
    Ok(cohort)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patients_are_deterministic() {
        let p = SynthParams::default();
        let a = generate_patient(3, 11, &p).unwrap();
        let b = generate_patient(3, 11, &p).unwrap();
        assert_eq!(a.volume, b.volume);
        assert_eq!(a.disease, b.disease);
        assert_eq!(a.outcome, b.outcome);
        assert!(!a.lung_left.is_empty() && !a.lung_right.is_empty() && !a.heart.is_empty());
        assert!(a.lung_left.intersection(&a.lung_right, MaskRole::Other).unwrap().is_empty());
    }
}
