//! Volumes, binary masks and the geometric operations applied to them before
//! feature extraction: HU clipping, isotropic resampling and connected
//! component labelling.
//!
//! Voxels are stored x-fastest, then y, then z.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound of the HU window applied before segmentation and extraction.
pub const HU_MIN: f64 = -1024.0;
/// Upper bound of the HU window.
pub const HU_MAX: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3], origin_mm: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid(format!("dims must be >= 1, got {dims:?}")));
        }
        if spacing_mm.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::invalid(format!(
                "spacing must be strictly positive, got {spacing_mm:?}"
            )));
        }
        if origin_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid("origin must be finite"));
        }
        Ok(Self {
            dims,
            spacing_mm,
            origin_mm,
        })
    }

    /// Unit-spacing geometry at the origin; convenient for tests and synthetic data.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3], [0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let yz = idx / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing_mm[0] * self.spacing_mm[1] * self.spacing_mm[2]
    }

    /// Checks that `other` describes the same grid.
    pub fn ensure_same(&self, other: &Geometry) -> Result<()> {
        if self != other {
            return Err(Error::GeometryMismatch(format!(
                "dims {:?}/{:?}, spacing {:?}/{:?}, origin {:?}/{:?}",
                self.dims,
                other.dims,
                self.spacing_mm,
                other.spacing_mm,
                self.origin_mm,
                other.origin_mm
            )));
        }
        Ok(())
    }

    /// Output geometry of an isotropic resample to `target_mm`.
    fn isotropic(&self, target_mm: f64) -> Geometry {
        let mut dims = [0usize; 3];
        for (axis, d) in dims.iter_mut().enumerate() {
            let n = (self.dims[axis] as f64 * self.spacing_mm[axis] / target_mm).round();
            *d = (n as usize).max(1);
        }
        Geometry {
            dims,
            spacing_mm: [target_mm; 3],
            origin_mm: self.origin_mm,
        }
    }
}

/// A CT volume in Hounsfield units.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    geometry: Geometry,
    voxels: Vec<f64>,
}

impl Volume {
    pub fn new(geometry: Geometry, voxels: Vec<f64>) -> Result<Self> {
        if voxels.len() != geometry.len() {
            return Err(Error::invalid(format!(
                "voxel count {} does not match dims {:?}",
                voxels.len(),
                geometry.dims
            )));
        }
        Ok(Self { geometry, voxels })
    }

    pub fn filled(geometry: Geometry, value: f64) -> Self {
        Self {
            voxels: vec![value; geometry.len()],
            geometry,
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn voxels(&self) -> &[f64] {
        &self.voxels
    }

    pub fn voxels_mut(&mut self) -> &mut [f64] {
        &mut self.voxels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.voxels[self.geometry.index(x, y, z)]
    }

    pub fn into_voxels(self) -> Vec<f64> {
        self.voxels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaskRole {
    LungLeft,
    LungRight,
    Disease,
    Heart,
    Other,
}

/// Binary mask aligned to a [`Volume`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    geometry: Geometry,
    voxels: Vec<bool>,
    role: MaskRole,
}

impl Mask {
    pub fn new(geometry: Geometry, voxels: Vec<bool>, role: MaskRole) -> Result<Self> {
        if voxels.len() != geometry.len() {
            return Err(Error::invalid(format!(
                "mask voxel count {} does not match dims {:?}",
                voxels.len(),
                geometry.dims
            )));
        }
        Ok(Self {
            geometry,
            voxels,
            role,
        })
    }

    pub fn empty(geometry: Geometry, role: MaskRole) -> Self {
        Self {
            voxels: vec![false; geometry.len()],
            geometry,
            role,
        }
    }

    /// Builds a mask from a predicate over voxel coordinates.
    pub fn from_fn(
        geometry: Geometry,
        role: MaskRole,
        mut f: impl FnMut(usize, usize, usize) -> bool,
    ) -> Self {
        let mut voxels = Vec::with_capacity(geometry.len());
        for z in 0..geometry.dims[2] {
            for y in 0..geometry.dims[1] {
                for x in 0..geometry.dims[0] {
                    voxels.push(f(x, y, z));
                }
            }
        }
        Self {
            geometry,
            voxels,
            role,
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn voxels(&self) -> &[bool] {
        &self.voxels
    }

    pub fn voxels_mut(&mut self) -> &mut [bool] {
        &mut self.voxels
    }

    pub fn role(&self) -> MaskRole {
        self.role
    }

    pub fn with_role(mut self, role: MaskRole) -> Self {
        self.role = role;
        self
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.voxels[self.geometry.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let idx = self.geometry.index(x, y, z);
        self.voxels[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.voxels.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.voxels.iter().any(|&v| v)
    }

    pub fn intersection(&self, other: &Mask, role: MaskRole) -> Result<Mask> {
        self.geometry.ensure_same(&other.geometry)?;
        let voxels = self
            .voxels
            .iter()
            .zip(&other.voxels)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(Mask {
            geometry: self.geometry,
            voxels,
            role,
        })
    }

    pub fn union(&self, other: &Mask, role: MaskRole) -> Result<Mask> {
        self.geometry.ensure_same(&other.geometry)?;
        let voxels = self
            .voxels
            .iter()
            .zip(&other.voxels)
            .map(|(&a, &b)| a || b)
            .collect();
        Ok(Mask {
            geometry: self.geometry,
            voxels,
            role,
        })
    }
}

/// Clamps every voxel into `[HU_MIN, HU_MAX]`.
pub fn clip_hu(v: &Volume) -> Volume {
    Volume {
        geometry: v.geometry,
        voxels: v.voxels.iter().map(|&x| x.clamp(HU_MIN, HU_MAX)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    /// Catmull-Rom tricubic with edge clamping.
    Cubic,
    NearestNeighbor,
}

/// Catmull-Rom weights for taps at offsets -1, 0, 1, 2 around `t` in `[0, 1)`.
#[inline]
pub(crate) fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Resamples one axis of a dense x-fastest array. `positions` are the
/// fractional input indices sampled for each output index along `axis`.
fn resample_axis(
    data: &[f64],
    dims: [usize; 3],
    axis: usize,
    positions: &[f64],
    kind: Interpolation,
) -> (Vec<f64>, [usize; 3]) {
    let mut out_dims = dims;
    out_dims[axis] = positions.len();
    let n_in = dims[axis] as isize;
    let stride_in = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };

    // Precompute taps and weights once per output position.
    let taps: Vec<([usize; 4], [f64; 4])> = positions
        .iter()
        .map(|&pos| match kind {
            Interpolation::Cubic => {
                let base = pos.floor();
                let t = pos - base;
                let base = base as isize;
                let clamp = |i: isize| i.clamp(0, n_in - 1) as usize;
                (
                    [
                        clamp(base - 1),
                        clamp(base),
                        clamp(base + 1),
                        clamp(base + 2),
                    ],
                    catmull_rom_weights(t),
                )
            }
            Interpolation::NearestNeighbor => {
                let i = (pos.round() as isize).clamp(0, n_in - 1) as usize;
                ([i; 4], [1.0, 0.0, 0.0, 0.0])
            }
        })
        .collect();

    let mut out = Vec::with_capacity(out_dims[0] * out_dims[1] * out_dims[2]);
    for z in 0..out_dims[2] {
        for y in 0..out_dims[1] {
            for x in 0..out_dims[0] {
                let out_coord = [x, y, z];
                let mut in_coord = out_coord;
                in_coord[axis] = 0;
                let base = in_coord[0] + dims[0] * (in_coord[1] + dims[1] * in_coord[2]);
                let (idx, w) = &taps[out_coord[axis]];
                let value = match kind {
                    Interpolation::NearestNeighbor => data[base + idx[0] * stride_in],
                    Interpolation::Cubic => {
                        let mut acc = 0.0;
                        for k in 0..4 {
                            acc += w[k] * data[base + idx[k] * stride_in];
                        }
                        acc
                    }
                };
                out.push(value);
            }
        }
    }
    (out, out_dims)
}

fn resample_grid(
    data: &[f64],
    geometry: &Geometry,
    target_mm: f64,
    kind: Interpolation,
) -> Result<(Vec<f64>, Geometry)> {
    if !(target_mm.is_finite() && target_mm > 0.0) {
        return Err(Error::invalid(format!(
            "target spacing must be positive, got {target_mm}"
        )));
    }
    let out_geom = geometry.isotropic(target_mm);
    // Output voxel k sits at origin + k * target, i.e. input index k * target / spacing.
    let mut current = data.to_vec();
    let mut dims = geometry.dims;
    for axis in 0..3 {
        let scale = target_mm / geometry.spacing_mm[axis];
        let positions: Vec<f64> = (0..out_geom.dims[axis])
            .map(|k| k as f64 * scale)
            .collect();
        let (next, next_dims) = resample_axis(&current, dims, axis, &positions, kind);
        current = next;
        dims = next_dims;
    }
    Ok((current, out_geom))
}

/// Resamples a volume onto an isotropic grid of `target_mm` spacing.
pub fn resample_isotropic(v: &Volume, target_mm: f64, kind: Interpolation) -> Result<Volume> {
    let (voxels, geometry) = resample_grid(&v.voxels, &v.geometry, target_mm, kind)?;
    Ok(Volume { geometry, voxels })
}

/// Resamples a mask with nearest-neighbour lookup and re-binarises it.
pub fn resample_mask(m: &Mask, target_mm: f64) -> Result<Mask> {
    let as_f64: Vec<f64> = m.voxels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let (voxels, geometry) =
        resample_grid(&as_f64, &m.geometry, target_mm, Interpolation::NearestNeighbor)?;
    Ok(Mask {
        geometry,
        voxels: voxels.into_iter().map(|v| v >= 0.5).collect(),
        role: m.role,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    /// Face neighbours only.
    Six,
    /// Face, edge and corner neighbours.
    TwentySix,
}

impl Connectivity {
    pub(crate) fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::with_capacity(26);
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::TwentySix => manhattan >= 1,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// Component labelling of a mask. Label 0 is background; components are
/// numbered `1..=count` in ascending order of their smallest linear index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRegions {
    pub labels: Vec<u32>,
    pub count: usize,
    pub connectivity: Connectivity,
    pub dims: [usize; 3],
}

impl LabeledRegions {
    /// Voxel count per component, index `k - 1` for label `k`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.count];
        for &l in &self.labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }
}

/// Flood-fill labelling over a grid where `same(a, b)` decides whether two
/// adjacent foreground voxels belong together. Returns labels and count.
pub(crate) fn label_components(
    dims: [usize; 3],
    foreground: impl Fn(usize) -> bool,
    same: impl Fn(usize, usize) -> bool,
    connectivity: Connectivity,
) -> (Vec<u32>, usize) {
    let n = dims[0] * dims[1] * dims[2];
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; n];
    let mut count = 0usize;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != 0 || !foreground(start) {
            continue;
        }
        count += 1;
        let label = count as u32;
        labels[start] = label;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let x = (idx % dims[0]) as isize;
            let y = ((idx / dims[0]) % dims[1]) as isize;
            let z = (idx / (dims[0] * dims[1])) as isize;
            for off in &offsets {
                let (nx, ny, nz) = (x + off[0], y + off[1], z + off[2]);
                if nx < 0
                    || ny < 0
                    || nz < 0
                    || nx >= dims[0] as isize
                    || ny >= dims[1] as isize
                    || nz >= dims[2] as isize
                {
                    continue;
                }
                let nidx = nx as usize + dims[0] * (ny as usize + dims[1] * nz as usize);
                if labels[nidx] == 0 && foreground(nidx) && same(idx, nidx) {
                    labels[nidx] = label;
                    queue.push_back(nidx);
                }
            }
        }
    }
    (labels, count)
}

pub fn connected_components(m: &Mask, connectivity: Connectivity) -> LabeledRegions {
    let vox = &m.voxels;
    let (labels, count) =
        label_components(m.geometry.dims, |i| vox[i], |_, _| true, connectivity);
    LabeledRegions {
        labels,
        count,
        connectivity,
        dims: m.geometry.dims,
    }
}
