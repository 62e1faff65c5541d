use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::format_err;
use crate::error::{Error, Result};
use crate::segfuse::ProbMap;
use crate::volume::{Geometry, Mask, MaskRole, Volume};

const MAGIC: &str = "MVOL";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "int16le")]
    Int16Le,
    #[serde(rename = "uint8")]
    Uint8,
    #[serde(rename = "float32le")]
    Float32Le,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::Int16Le => 2,
            Dtype::Uint8 => 1,
            Dtype::Float32Le => 4,
        }
    }
}

/// JSON sidecar describing a raw little-endian payload (x fastest, z slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvolHeader {
    pub format: String,
    pub version: u32,
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub dtype: Dtype,
    /// Payload file name, relative to the header's directory.
    pub payload: String,
}

impl MvolHeader {
    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.dims, self.spacing_mm, self.origin_mm)
    }
}

fn payload_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("raw")
}

pub fn read_header(path: &Path) -> Result<MvolHeader> {
    let text = super::read_text(path)?;
    let h: MvolHeader =
        serde_json::from_str(&text).map_err(|e| format_err(path, format!("bad header: {e}")))?;
    if h.format != MAGIC {
        return Err(format_err(path, format!("format must be {MAGIC}, got {}", h.format)));
    }
    if h.version != VERSION {
        return Err(format_err(path, format!("unsupported version {}", h.version)));
    }
    h.geometry().map_err(|e| format_err(path, e.to_string()))?;
    Ok(h)
}

fn read_payload(path: &Path) -> Result<(MvolHeader, Vec<u8>)> {
    let h = read_header(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let raw_path = dir.join(&h.payload);
    let bytes = super::read_bytes(&raw_path)?;
    let expected = h.dims.iter().product::<usize>() * h.dtype.size();
    if bytes.len() != expected {
        return Err(format_err(
            path,
            format!("payload has {} bytes, dims {:?} need {expected}", bytes.len(), h.dims),
        ));
    }
    Ok((h, bytes))
}

fn decode(h: &MvolHeader, bytes: &[u8]) -> Vec<f64> {
    match h.dtype {
        Dtype::Int16Le => bytes
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64)
            .collect(),
        Dtype::Uint8 => bytes.iter().map(|&b| b as f64).collect(),
        Dtype::Float32Le => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
    }
}

fn write_payload(path: &Path, geometry: &Geometry, dtype: Dtype, bytes: &[u8]) -> Result<()> {
    let raw = payload_path(path);
    let header = MvolHeader {
        format: MAGIC.into(),
        version: VERSION,
        dims: geometry.dims,
        spacing_mm: geometry.spacing_mm,
        origin_mm: geometry.origin_mm,
        dtype,
        payload: raw
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::invalid(format!("bad output path {}", path.display())))?
            .to_string(),
    };
    if raw == path {
        return Err(Error::invalid("header path must not end in .raw"));
    }
    fs::write(&raw, bytes)?;
    let mut text = serde_json::to_string_pretty(&header)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads any dtype as HU.
pub fn read_volume(path: &Path) -> Result<Volume> {
    let (h, bytes) = read_payload(path)?;
    Volume::new(h.geometry()?, decode(&h, &bytes))
}

/// Writes `int16le`; voxels must be integral and within the `i16` range.
pub fn write_volume(path: &Path, v: &Volume) -> Result<()> {
    let mut bytes = Vec::with_capacity(v.voxels().len() * 2);
    for &x in v.voxels() {
        if x.fract() != 0.0 || x < i16::MIN as f64 || x > i16::MAX as f64 {
            return Err(Error::invalid(format!("voxel value {x} is not representable as int16")));
        }
        bytes.extend_from_slice(&(x as i16).to_le_bytes());
    }
    write_payload(path, v.geometry(), Dtype::Int16Le, &bytes)
}

/// Nonzero voxels are foreground.
pub fn read_mask(path: &Path, role: MaskRole) -> Result<Mask> {
    let (h, bytes) = read_payload(path)?;
    let vals = decode(&h, &bytes);
    Mask::new(h.geometry()?, vals.iter().map(|&v| v != 0.0).collect(), role)
}

pub fn write_mask(path: &Path, m: &Mask) -> Result<()> {
    let bytes: Vec<u8> = m.voxels().iter().map(|&b| b as u8).collect();
    write_payload(path, m.geometry(), Dtype::Uint8, &bytes)
}

/// `uint8` masks read as 0/1 probabilities.
pub fn read_probmap(path: &Path) -> Result<ProbMap> {
    let (h, bytes) = read_payload(path)?;
    let vals = decode(&h, &bytes);
    let vals = if h.dtype == Dtype::Uint8 {
        vals.into_iter().map(|v| (v != 0.0) as u8 as f64).collect()
    } else {
        vals
    };
    ProbMap::new(h.geometry()?, vals).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_probmap(path: &Path, p: &ProbMap) -> Result<()> {
    let mut bytes = Vec::with_capacity(p.values().len() * 4);
    for &v in p.values() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_payload(path, p.geometry(), Dtype::Float32Le, &bytes)
}
