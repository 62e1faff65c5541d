//! Radiomics feature extraction on masked regions.
//!
//! Four feature families are computed per region: first-order intensity
//! statistics, voxel-based 3D shape, and the GLSZM and GLRLM texture
//! matrices on a fixed-bin-width discretisation.

mod discretize;
mod extract;
mod firstorder;
mod glrlm;
mod glszm;
mod normalize;
mod shape;

pub use discretize::{discretize, GrayMap, DEFAULT_BIN_WIDTH_HU};
pub use extract::{
    extract_patient_features, feature_names, reference_feature_set, ExtractionSettings,
    FeatureVector, Marginal, NonUniformityMapping, PatientMasks, Region, FAMILY_SIZES,
};
pub use firstorder::{first_order, FIRST_ORDER_NAMES};
pub use glrlm::{glrlm, glrlm_features, RunLengthMatrices, GLRLM_DIRECTIONS, GLRLM_NAMES};
pub use glszm::{glszm, glszm_features, SizeZoneMatrix, GLSZM_NAMES};
pub use normalize::{minmax_apply, minmax_fit, NormParams};
pub use shape::{max_pairwise_distance, shape_features, SHAPE_NAMES};

/// A named feature value as produced by one family.
pub type Feature = (&'static str, f64);
