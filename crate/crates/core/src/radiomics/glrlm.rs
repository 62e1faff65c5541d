use super::glszm::zone_like_features;
use super::{Feature, GrayMap};
use crate::error::{Error, Result};

pub const GLRLM_NAMES: [&str; 16] = [
    "short_run_emphasis",
    "long_run_emphasis",
    "gray_level_nonuniformity",
    "gray_level_nonuniformity_normalized",
    "run_length_nonuniformity",
    "run_length_nonuniformity_normalized",
    "run_percentage",
    "gray_level_variance",
    "run_variance",
    "run_entropy",
    "low_gray_level_run_emphasis",
    "high_gray_level_run_emphasis",
    "short_run_low_gray_level_emphasis",
    "short_run_high_gray_level_emphasis",
    "long_run_low_gray_level_emphasis",
    "long_run_high_gray_level_emphasis",
];

/// The 13 unique 3D directions (one of each opposite pair).
pub const GLRLM_DIRECTIONS: [[isize; 3]; 13] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, -1, 0],
    [1, 0, 1],
    [1, 0, -1],
    [0, 1, 1],
    [0, 1, -1],
    [1, 1, 1],
    [1, 1, -1],
    [1, -1, 1],
    [1, -1, -1],
];

/// Per-direction run-length matrices. `counts[d][(level - 1) * max_run + (len - 1)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLengthMatrices {
    pub ng: u32,
    pub max_run: usize,
    pub counts: Vec<Vec<u64>>,
    pub n_voxels: usize,
}

impl RunLengthMatrices {
    pub fn get(&self, direction: usize, level: u32, len: usize) -> u64 {
        self.counts[direction][(level as usize - 1) * self.max_run + (len - 1)]
    }

    /// Number of runs in one direction.
    pub fn nr(&self, direction: usize) -> u64 {
        self.counts[direction].iter().sum()
    }
}

/// Runs are maximal collinear sequences of in-mask voxels with equal level.
pub fn glrlm(g: &GrayMap) -> Result<RunLengthMatrices> {
    let dims = g.geometry.dims;
    let n_voxels = g.voxel_count();
    if n_voxels == 0 {
        return Err(Error::EmptyRegion("run-length matrix of an empty map".into()));
    }
    let max_run = *dims.iter().max().unwrap();
    let ng = g.ng as usize;
    let inside = |x: isize, y: isize, z: isize| {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < dims[0]
            && (y as usize) < dims[1]
            && (z as usize) < dims[2]
    };
    let level_at = |x: isize, y: isize, z: isize| -> u32 {
        if inside(x, y, z) {
            g.levels[g.geometry.index(x as usize, y as usize, z as usize)]
        } else {
            0
        }
    };
    let mut counts = Vec::with_capacity(GLRLM_DIRECTIONS.len());
    for d in GLRLM_DIRECTIONS {
        let mut m = vec![0u64; ng * max_run];
        for z in 0..dims[2] as isize {
            for y in 0..dims[1] as isize {
                for x in 0..dims[0] as isize {
                    let level = level_at(x, y, z);
                    if level == 0 || level_at(x - d[0], y - d[1], z - d[2]) == level {
                        continue;
                    }
                    let mut len = 1usize;
                    let (mut cx, mut cy, mut cz) = (x + d[0], y + d[1], z + d[2]);
                    while level_at(cx, cy, cz) == level {
                        len += 1;
                        cx += d[0];
                        cy += d[1];
                        cz += d[2];
                    }
                    m[(level as usize - 1) * max_run + (len - 1)] += 1;
                }
            }
        }
        counts.push(m);
    }
    Ok(RunLengthMatrices {
        ng: g.ng,
        max_run,
        counts,
        n_voxels,
    })
}

fn direction_entries(r: &RunLengthMatrices, d: usize) -> Vec<(u32, usize, f64)> {
    r.counts[d]
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| ((k / r.max_run + 1) as u32, k % r.max_run + 1, c as f64))
        .collect()
}

/// Features per direction, averaged over the 13 directions.
pub fn glrlm_features(r: &RunLengthMatrices) -> Result<Vec<Feature>> {
    let mut acc = [0.0f64; 16];
    let mut used = 0usize;
    for d in 0..r.counts.len() {
        let entries = direction_entries(r, d);
        if entries.is_empty() {
            continue;
        }
        let f = zone_like_features(&entries, r.n_voxels);
        for (a, v) in acc.iter_mut().zip(f) {
            *a += v;
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyRegion("run-length matrices are empty".into()));
    }
    Ok(GLRLM_NAMES
        .iter()
        .copied()
        .zip(acc.iter().map(|a| a / used as f64))
        .collect())
}
