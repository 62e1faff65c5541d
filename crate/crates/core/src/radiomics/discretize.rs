use crate::error::{Error, Result};
use crate::volume::{Geometry, Mask, Volume};

pub const DEFAULT_BIN_WIDTH_HU: f64 = 25.0;

/// Discretised intensities: `1..=ng` inside the mask, 0 outside.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    pub geometry: Geometry,
    pub levels: Vec<u32>,
    pub ng: u32,
    pub bin_width_hu: f64,
}

impl GrayMap {
    /// Builds a map directly from levels (0 = outside); `ng` is the maximum level.
    pub fn from_levels(geometry: Geometry, levels: Vec<u32>) -> Result<Self> {
        if levels.len() != geometry.len() {
            return Err(Error::invalid("level count does not match geometry"));
        }
        let ng = levels.iter().copied().max().unwrap_or(0);
        if ng == 0 {
            return Err(Error::EmptyRegion("gray map has no in-mask voxels".into()));
        }
        Ok(Self {
            geometry,
            levels,
            ng,
            bin_width_hu: 1.0,
        })
    }

    pub fn voxel_count(&self) -> usize {
        self.levels.iter().filter(|&&l| l > 0).count()
    }
}

/// `level = floor((hu - min_in_mask) / bin_width) + 1`.
pub fn discretize(v: &Volume, m: &Mask, bin_width_hu: f64) -> Result<GrayMap> {
    v.geometry().ensure_same(m.geometry())?;
    if !(bin_width_hu.is_finite() && bin_width_hu > 0.0) {
        return Err(Error::invalid(format!("bin width must be > 0, got {bin_width_hu}")));
    }
    let min = v
        .voxels()
        .iter()
        .zip(m.voxels())
        .filter_map(|(&x, &b)| b.then_some(x))
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::EmptyRegion("cannot discretize an empty mask".into()));
    }
    let levels: Vec<u32> = v
        .voxels()
        .iter()
        .zip(m.voxels())
        .map(|(&x, &b)| {
            if b {
                ((x - min) / bin_width_hu).floor() as u32 + 1
            } else {
                0
            }
        })
        .collect();
    let ng = levels.iter().copied().max().unwrap_or(1);
    Ok(GrayMap {
        geometry: *v.geometry(),
        levels,
        ng,
        bin_width_hu,
    })
}
