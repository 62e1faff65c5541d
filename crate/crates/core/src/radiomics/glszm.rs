use std::collections::BTreeMap;

use super::{Feature, GrayMap};
use crate::error::{Error, Result};
use crate::volume::{label_components, Connectivity};

pub const GLSZM_NAMES: [&str; 16] = [
    "small_area_emphasis",
    "large_area_emphasis",
    "gray_level_nonuniformity",
    "gray_level_nonuniformity_normalized",
    "size_zone_nonuniformity",
    "size_zone_nonuniformity_normalized",
    "zone_percentage",
    "gray_level_variance",
    "zone_variance",
    "zone_entropy",
    "low_gray_level_zone_emphasis",
    "high_gray_level_zone_emphasis",
    "small_area_low_gray_level_emphasis",
    "small_area_high_gray_level_emphasis",
    "large_area_low_gray_level_emphasis",
    "large_area_high_gray_level_emphasis",
];

/// Gray-level size-zone matrix, stored sparsely as `(level, size) -> count`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SizeZoneMatrix {
    pub counts: BTreeMap<(u32, usize), u64>,
    pub ng: u32,
    /// Number of in-mask voxels the zones were built from.
    pub n_voxels: usize,
}

impl SizeZoneMatrix {
    pub fn get(&self, level: u32, size: usize) -> u64 {
        self.counts.get(&(level, size)).copied().unwrap_or(0)
    }

    /// Total number of zones.
    pub fn nz(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Zones are maximal connected sets of in-mask voxels sharing a gray level.
pub fn glszm(g: &GrayMap, connectivity: Connectivity) -> Result<SizeZoneMatrix> {
    let levels = &g.levels;
    let (labels, count) = label_components(
        g.geometry.dims,
        |i| levels[i] > 0,
        |a, b| levels[a] == levels[b],
        connectivity,
    );
    if count == 0 {
        return Err(Error::EmptyRegion("size-zone matrix of an empty map".into()));
    }
    let mut sizes = vec![0usize; count];
    let mut zone_level = vec![0u32; count];
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            sizes[l as usize - 1] += 1;
            zone_level[l as usize - 1] = levels[i];
        }
    }
    let mut counts = BTreeMap::new();
    for (size, level) in sizes.iter().zip(&zone_level) {
        *counts.entry((*level, *size)).or_insert(0) += 1;
    }
    Ok(SizeZoneMatrix {
        counts,
        ng: g.ng,
        n_voxels: sizes.iter().sum(),
    })
}

const LOG_EPS: f64 = 2.220_446_049_250_313e-16;

/// Texture features shared by the size-zone and run-length matrices: the
/// matrix is passed as `(level, length, count)` triples plus the voxel count.
pub(super) fn zone_like_features(entries: &[(u32, usize, f64)], n_voxels: usize) -> [f64; 16] {
    let total: f64 = entries.iter().map(|e| e.2).sum();
    let mut by_level: BTreeMap<u32, f64> = BTreeMap::new();
    let mut by_size: BTreeMap<usize, f64> = BTreeMap::new();
    let mut f = [0.0f64; 16];
    let (mut mu_i, mut mu_j) = (0.0, 0.0);
    for &(i, j, c) in entries {
        let (fi, fj) = (i as f64, j as f64);
        *by_level.entry(i).or_default() += c;
        *by_size.entry(j).or_default() += c;
        f[0] += c / (fj * fj);
        f[1] += c * fj * fj;
        f[10] += c / (fi * fi);
        f[11] += c * fi * fi;
        f[12] += c / (fi * fi * fj * fj);
        f[13] += c * fi * fi / (fj * fj);
        f[14] += c * fj * fj / (fi * fi);
        f[15] += c * fi * fi * fj * fj;
        let p = c / total;
        mu_i += p * fi;
        mu_j += p * fj;
        f[9] -= p * (p + LOG_EPS).log2();
    }
    for idx in [0, 1, 10, 11, 12, 13, 14, 15] {
        f[idx] /= total;
    }
    let gln: f64 = by_level.values().map(|s| s * s).sum();
    let szn: f64 = by_size.values().map(|s| s * s).sum();
    f[2] = gln / total;
    f[3] = gln / (total * total);
    f[4] = szn / total;
    f[5] = szn / (total * total);
    f[6] = total / n_voxels as f64;
    for &(i, j, c) in entries {
        let p = c / total;
        f[7] += p * (i as f64 - mu_i).powi(2);
        f[8] += p * (j as f64 - mu_j).powi(2);
    }
    f
}

pub fn glszm_features(z: &SizeZoneMatrix) -> Result<Vec<Feature>> {
    if z.counts.is_empty() {
        return Err(Error::EmptyRegion("size-zone matrix has no zones".into()));
    }
    let entries: Vec<(u32, usize, f64)> =
        z.counts.iter().map(|(&(i, j), &c)| (i, j, c as f64)).collect();
    let values = zone_like_features(&entries, z.n_voxels);
    Ok(GLSZM_NAMES.iter().copied().zip(values).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;
    use std::collections::HashMap;

    fn map(dims: [usize; 3], levels: Vec<u32>) -> GrayMap {
        GrayMap::from_levels(Geometry::unit(dims).unwrap(), levels).unwrap()
    }

    fn feats(z: &SizeZoneMatrix) -> HashMap<&'static str, f64> {
        glszm_features(z).unwrap().into_iter().collect()
    }

    #[test]
    fn uniform_square_is_one_zone() {
        let z = glszm(&map([2, 2, 1], vec![1; 4]), Connectivity::TwentySix).unwrap();
        assert_eq!(z.get(1, 4), 1);
        assert_eq!(z.nz(), 1);
        let f = feats(&z);
        assert_eq!(f["gray_level_nonuniformity"], 1.0);
        assert_eq!(f["size_zone_nonuniformity"], 1.0);
    }

    #[test]
    fn two_level_square() {
        let z = glszm(&map([2, 2, 1], vec![1, 1, 2, 2]), Connectivity::TwentySix).unwrap();
        assert_eq!(z.get(1, 2), 1);
        assert_eq!(z.get(2, 2), 1);
        assert_eq!(z.nz(), 2);
        let f = feats(&z);
        assert!((f["gray_level_nonuniformity"] - 1.0).abs() < 1e-15);
        assert!((f["size_zone_nonuniformity"] - 2.0).abs() < 1e-15);
        assert_eq!(f["zone_percentage"], 0.5);
    }

    #[test]
    fn diagonal_neighbours_join_only_under_26() {
        let levels = vec![1, 0, 0, 1];
        let z26 = glszm(&map([2, 2, 1], levels.clone()), Connectivity::TwentySix).unwrap();
        let z6 = glszm(&map([2, 2, 1], levels), Connectivity::Six).unwrap();
        assert_eq!(z26.get(1, 2), 1);
        assert_eq!(z6.get(1, 1), 2);
    }

    #[test]
    fn duplicating_zones_doubles_nonuniformities() {
        let z = glszm(&map([3, 3, 1], vec![1, 1, 2, 3, 3, 2, 1, 2, 2]), Connectivity::TwentySix).unwrap();
        let mut doubled = z.clone();
        doubled.counts.values_mut().for_each(|c| *c *= 2);
        doubled.n_voxels *= 2;
        let (a, b) = (feats(&z), feats(&doubled));
        assert!((b["gray_level_nonuniformity"] - 2.0 * a["gray_level_nonuniformity"]).abs() < 1e-12);
        assert!((b["size_zone_nonuniformity"] - 2.0 * a["size_zone_nonuniformity"]).abs() < 1e-12);
        assert_eq!(doubled.nz(), 2 * z.nz());
    }
}
