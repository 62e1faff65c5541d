//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use ctprog::config::RunConfig;
use ctprog::featselect::stratified_holdout;
use ctprog::io::read_manifest;
use ctprog::pipeline::{evaluate, extract_features, predict, select_features, train};
use ctprog::staging::Outcome;
use ctprog::synth::{write_cohort, SynthCohort, SynthParams};
use ctprog::table::FeatureTable;
use ctprog::volume::{Geometry, Mask, MaskRole};
use rand::Rng;

/// Random geometry up to `max` voxels per axis with dyadic spacing, so that
/// distances are exact in floating point.
pub fn random_geometry(rng: &mut impl Rng, max: usize) -> Geometry {
    let dims = [0; 3].map(|_| rng.random_range(1..=max));
    let spacing = [0; 3].map(|_| [0.5, 1.0, 1.5, 2.0][rng.random_range(0..4)]);
    Geometry::new(dims, spacing, [0.0; 3]).unwrap()
}

pub fn random_mask(rng: &mut impl Rng, g: Geometry, density: f64) -> Mask {
    Mask::from_fn(g, MaskRole::Disease, |_, _, _| rng.random::<f64>() < density)
}

pub fn points(m: &Mask) -> Vec<[f64; 3]> {
    let g = m.geometry();
    let mut out = Vec::new();
    for z in 0..g.dims[2] {
        for y in 0..g.dims[1] {
            for x in 0..g.dims[0] {
                if m.get(x, y, z) {
                    out.push([x as f64 * g.spacing_mm[0], y as f64 * g.spacing_mm[1], z as f64 * g.spacing_mm[2]]);
                }
            }
        }
    }
    out
}

pub fn brute_dice(a: &Mask, b: &Mask) -> f64 {
    let na = a.voxels().iter().filter(|&&v| v).count();
    let nb = b.voxels().iter().filter(|&&v| v).count();
    let both = a.voxels().iter().zip(b.voxels()).filter(|(x, y)| **x && **y).count();
    if na + nb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (na + nb) as f64
    }
}

fn directed(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| {
                    let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
                    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// O(|A|·|B|) symmetric Hausdorff distance.
pub fn brute_hausdorff(a: &Mask, b: &Mask) -> f64 {
    let (pa, pb) = (points(a), points(b));
    directed(&pa, &pb).max(directed(&pb, &pa))
}

pub fn random_levels(rng: &mut impl Rng, n: usize, ng: u32, p_outside: f64) -> Vec<u32> {
    let mut levels: Vec<u32> = (0..n)
        .map(|_| if rng.random::<f64>() < p_outside { 0 } else { rng.random_range(1..=ng) })
        .collect();
    if levels.iter().all(|&l| l == 0) {
        levels[0] = 1;
    }
    levels
}

fn neighbours(dims: [usize; 3], i: usize, full: bool) -> Vec<usize> {
    let (x, y, z) = (i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1]));
    let mut out = Vec::new();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let manhattan = dx.abs() + dy.abs() + dz.abs();
                if manhattan == 0 || (!full && manhattan > 1) {
                    continue;
                }
                let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                if nx < 0 || ny < 0 || nz < 0 || nx >= dims[0] as i64 || ny >= dims[1] as i64 || nz >= dims[2] as i64 {
                    continue;
                }
                out.push(nx as usize + dims[0] * (ny as usize + dims[1] * nz as usize));
            }
        }
    }
    out
}

/// Breadth-first flood fill of equal-level zones: `(level, size) -> count`.
pub fn flood_fill_zones(dims: [usize; 3], levels: &[u32], full: bool) -> BTreeMap<(u32, usize), u64> {
    let mut seen = vec![false; levels.len()];
    let mut out = BTreeMap::new();
    for start in 0..levels.len() {
        if levels[start] == 0 || seen[start] {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            for j in neighbours(dims, i, full) {
                if !seen[j] && levels[j] == levels[start] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        *out.entry((levels[start], size)).or_insert(0) += 1;
    }
    out
}

/// Walks every full line of the grid along `d` and splits it into maximal
/// runs: `(level, length) -> count`.
pub fn line_scan_runs(dims: [usize; 3], levels: &[u32], d: [isize; 3]) -> BTreeMap<(u32, usize), u64> {
    let inside = |p: [isize; 3]| (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < dims[a]);
    let idx = |p: [isize; 3]| p[0] as usize + dims[0] * (p[1] as usize + dims[1] * p[2] as usize);
    let mut out = BTreeMap::new();
    for z in 0..dims[2] as isize {
        for y in 0..dims[1] as isize {
            for x in 0..dims[0] as isize {
                let start = [x, y, z];
                if inside([x - d[0], y - d[1], z - d[2]]) {
                    continue;
                }
                let mut line = Vec::new();
                let mut p = start;
                while inside(p) {
                    line.push(levels[idx(p)]);
                    p = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
                }
                let mut k = 0;
                while k < line.len() {
                    let mut e = k;
                    while e + 1 < line.len() && line[e + 1] == line[k] {
                        e += 1;
                    }
                    if line[k] > 0 {
                        *out.entry((line[k], e - k + 1)).or_insert(0) += 1;
                    }
                    k = e + 1;
                }
            }
        }
    }
    out
}

/// Extracted features for a synthetic cohort plus its ground truth.
pub struct SynthData {
    pub cohort: SynthCohort,
    pub table: FeatureTable,
}

pub fn synth_features(dir: &Path, n: usize, seed: u64) -> SynthData {
    let cohort = write_cohort(dir, n, seed, &SynthParams::default()).unwrap();
    let manifest = read_manifest(&dir.join("manifest.csv")).unwrap();
    let (table, failures) = extract_features(&manifest.rows, &RunConfig::default()).unwrap();
    assert!(failures.is_empty(), "{} rows failed", failures.len());
    SynthData { cohort, table }
}

pub struct HoldoutRun {
    pub selection: ctprog::featselect::SelectionReport,
    pub train_rows: Vec<usize>,
    pub stage1_ba: f64,
    pub stage2_ba: Option<f64>,
}

/// Select, screen, train on 80% and score the held-out 20%.
pub fn holdout_run(table: &FeatureTable, seed: u64) -> HoldoutRun {
    let cfg = RunConfig { seed, ..Default::default() };
    let codes: Vec<u8> = table.outcomes().unwrap().iter().map(|o| o.code()).collect();
    let split = stratified_holdout(&codes, 0.2, seed).unwrap();
    let train_t = table.subset(&split.train);
    let test_t = table.subset(&split.validation);
    let selection = select_features(&train_t, &cfg).unwrap();
    let trained = train(&train_t, &selection, &cfg).unwrap();
    let preds = predict(&trained.model, &test_t).unwrap();
    let truth: Vec<(String, Outcome)> =
        test_t.rows.iter().map(|r| (r.patient_id.clone(), r.outcome.unwrap())).collect();
    let reports = evaluate(&preds, &truth).unwrap();
    let ba = |task: &str| reports.iter().find(|(t, _)| t == task).map(|(_, m)| m.balanced_accuracy);
    HoldoutRun {
        selection,
        train_rows: split.train,
        stage1_ba: ba("stage1").unwrap(),
        stage2_ba: ba("stage2"),
    }
}
