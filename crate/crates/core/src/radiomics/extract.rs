use serde::{Deserialize, Serialize};

use super::{
    discretize, first_order, glrlm, glrlm_features, glszm, glszm_features, shape_features,
    Feature, DEFAULT_BIN_WIDTH_HU, FIRST_ORDER_NAMES, GLRLM_NAMES, GLSZM_NAMES, SHAPE_NAMES,
};
use crate::error::{Error, Result};
use crate::evalmetrics::disease_extent;
use crate::volume::{connected_components, Connectivity, Geometry, Mask, MaskRole, Volume};

/// Feature families in column order with their per-region sizes.
pub const FAMILY_SIZES: [(&str, usize); 4] = [
    ("firstorder", FIRST_ORDER_NAMES.len()),
    ("shape", SHAPE_NAMES.len()),
    ("glszm", GLSZM_NAMES.len()),
    ("glrlm", GLRLM_NAMES.len()),
];

const METADATA: [&str; 7] = [
    "age",
    "gender",
    "disease_extent_pct",
    "n_disease_regions",
    "disease_left_present",
    "disease_right_present",
    "heart_present",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    DiseaseLeft,
    DiseaseRight,
    LungLeft,
    LungRight,
    Heart,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::DiseaseLeft,
        Region::DiseaseRight,
        Region::LungLeft,
        Region::LungRight,
        Region::Heart,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Region::DiseaseLeft => "disease_left",
            Region::DiseaseRight => "disease_right",
            Region::LungLeft => "lung_left",
            Region::LungRight => "lung_right",
            Region::Heart => "heart",
        }
    }
}

/// Which marginal of a texture matrix stands for "non-uniformity".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    GrayLevel,
    /// Zone size for the GLSZM, run length for the GLRLM.
    Length,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonUniformityMapping {
    pub glszm: Marginal,
    pub glrlm: Marginal,
}

impl Default for NonUniformityMapping {
    fn default() -> Self {
        Self {
            glszm: Marginal::GrayLevel,
            glrlm: Marginal::Length,
        }
    }
}

impl NonUniformityMapping {
    pub fn glszm_feature(&self) -> &'static str {
        match self.glszm {
            Marginal::GrayLevel => "glszm_gray_level_nonuniformity",
            Marginal::Length => "glszm_size_zone_nonuniformity",
        }
    }

    pub fn glrlm_feature(&self) -> &'static str {
        match self.glrlm {
            Marginal::GrayLevel => "glrlm_gray_level_nonuniformity",
            Marginal::Length => "glrlm_run_length_nonuniformity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSettings {
    pub bin_width_hu: f64,
    pub connectivity: Connectivity,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        Self {
            bin_width_hu: DEFAULT_BIN_WIDTH_HU,
            connectivity: Connectivity::TwentySix,
        }
    }
}

/// Region masks of one patient, all on the volume's grid.
#[derive(Debug, Clone)]
pub struct PatientMasks {
    pub lung_left: Mask,
    pub lung_right: Mask,
    pub disease: Option<Mask>,
    pub heart: Option<Mask>,
}

/// Ordered feature names and values for one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

fn region_names(region: Region) -> Vec<String> {
    let families: [(&str, &[&str]); 4] = [
        ("firstorder", &FIRST_ORDER_NAMES),
        ("shape", &SHAPE_NAMES),
        ("glszm", &GLSZM_NAMES),
        ("glrlm", &GLRLM_NAMES),
    ];
    families
        .iter()
        .flat_map(|(fam, names)| names.iter().map(move |n| format!("{}_{fam}_{n}", region.name())))
        .collect()
}

/// Canonical column order: metadata, then every region's four families.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = METADATA.iter().map(|s| s.to_string()).collect();
    for r in Region::ALL {
        names.extend(region_names(r));
    }
    names
}

/// The twelve features singled out for staging and prognosis, expanded to
/// left and right sides where the region is lateral.
pub fn reference_feature_set(mapping: NonUniformityMapping) -> Vec<String> {
    let mut names = vec![
        "age".to_string(),
        "gender".to_string(),
        "disease_extent_pct".to_string(),
        format!("heart_{}", mapping.glszm_feature()),
    ];
    for side in ["left", "right"] {
        names.push(format!("lung_{side}_firstorder_skewness"));
        names.push(format!("lung_{side}_firstorder_percentile_90"));
    }
    for side in ["left", "right"] {
        let r = format!("disease_{side}");
        names.push(format!("{r}_firstorder_maximum"));
        names.push(format!("{r}_shape_surface_mm2"));
        names.push(format!("{r}_shape_max_2d_diameter_slice_mm"));
        names.push(format!("{r}_shape_volume_mm3"));
        names.push(format!("{r}_{}", mapping.glszm_feature()));
        names.push(format!("{r}_{}", mapping.glrlm_feature()));
    }
    names
}

/// Crops volume and mask to the mask's bounding box; features are unaffected
/// because everything outside the box is background.
fn crop(v: &Volume, m: &Mask) -> Result<(Volume, Mask)> {
    let g = m.geometry();
    let mut lo = g.dims;
    let mut hi = [0usize; 3];
    for (i, _) in m.voxels().iter().enumerate().filter(|(_, &b)| b) {
        let c = g.coords(i);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let origin = [
        g.origin_mm[0] + lo[0] as f64 * g.spacing_mm[0],
        g.origin_mm[1] + lo[1] as f64 * g.spacing_mm[1],
        g.origin_mm[2] + lo[2] as f64 * g.spacing_mm[2],
    ];
    let cg = Geometry::new(dims, g.spacing_mm, origin)?;
    let mut hu = Vec::with_capacity(cg.len());
    let mut inside = Vec::with_capacity(cg.len());
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                hu.push(v.get(x, y, z));
                inside.push(m.get(x, y, z));
            }
        }
    }
    Ok((Volume::new(cg, hu)?, Mask::new(cg, inside, m.role())?))
}

/// All four families of one nonempty region, in column order.
pub(crate) fn region_features(
    v: &Volume,
    m: &Mask,
    settings: &ExtractionSettings,
) -> Result<Vec<Feature>> {
    let (v, m) = crop(v, m)?;
    let g = discretize(&v, &m, settings.bin_width_hu)?;
    let mut out = first_order(&v, &m, settings.bin_width_hu)?;
    out.extend(shape_features(&m)?);
    out.extend(glszm_features(&glszm(&g, settings.connectivity)?)?);
    out.extend(glrlm_features(&glrlm(&g)?)?);
    Ok(out)
}

/// Extracts the full feature vector of one patient.
///
/// The volume is expected to be clipped and resampled already, with masks on
/// the same grid. Disease is split per side as disease ∩ lung. An empty
/// disease side or missing heart yields zero-filled features and a 0 presence
/// flag.
pub fn extract_patient_features(
    v: &Volume,
    masks: &PatientMasks,
    age: f64,
    male: bool,
    settings: &ExtractionSettings,
) -> Result<FeatureVector> {
    let geom = v.geometry();
    for m in [&masks.lung_left, &masks.lung_right]
        .into_iter()
        .chain(masks.disease.as_ref())
        .chain(masks.heart.as_ref())
    {
        geom.ensure_same(m.geometry())?;
    }
    if masks.lung_left.is_empty() || masks.lung_right.is_empty() {
        return Err(Error::EmptyRegion("both lung masks must be nonempty".into()));
    }
    if !age.is_finite() {
        return Err(Error::invalid("age must be finite"));
    }
    let disease = masks
        .disease
        .clone()
        .unwrap_or_else(|| Mask::empty(*geom, MaskRole::Disease));
    let lungs = masks.lung_left.union(&masks.lung_right, MaskRole::Other)?;
    let disease_in_lungs = disease.intersection(&lungs, MaskRole::Disease)?;
    let disease_left = disease.intersection(&masks.lung_left, MaskRole::Disease)?;
    let disease_right = disease.intersection(&masks.lung_right, MaskRole::Disease)?;
    let heart = masks
        .heart
        .clone()
        .unwrap_or_else(|| Mask::empty(*geom, MaskRole::Heart));

    let extent = disease_extent(&disease, &masks.lung_left, &masks.lung_right)?;
    let n_regions = connected_components(&disease_in_lungs, settings.connectivity).count;

    let mut names: Vec<String> = METADATA.iter().map(|s| s.to_string()).collect();
    let mut values = vec![
        age,
        if male { 1.0 } else { 0.0 },
        extent,
        n_regions as f64,
        (!disease_left.is_empty()) as u8 as f64,
        (!disease_right.is_empty()) as u8 as f64,
        (!heart.is_empty()) as u8 as f64,
    ];
    let regions: [(Region, &Mask); 5] = [
        (Region::DiseaseLeft, &disease_left),
        (Region::DiseaseRight, &disease_right),
        (Region::LungLeft, &masks.lung_left),
        (Region::LungRight, &masks.lung_right),
        (Region::Heart, &heart),
    ];
    for (region, mask) in regions {
        let region_cols = region_names(region);
        if mask.is_empty() {
            values.extend(std::iter::repeat_n(0.0, region_cols.len()));
        } else {
            let feats = region_features(v, mask, settings)?;
            debug_assert_eq!(feats.len(), region_cols.len());
            values.extend(feats.iter().map(|f| f.1));
        }
        names.extend(region_cols);
    }
    if let Some(i) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::UndefinedMetric(format!("feature {} is not finite", names[i])));
    }
    Ok(FeatureVector { names, values })
}
