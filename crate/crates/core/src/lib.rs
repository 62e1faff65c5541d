//! CT-based lung disease quantification and short-term outcome prediction.
//!
//! The crate is organised along the processing chain:
//!
//! * [`volume`] – volumes, masks, HU clipping, isotropic resampling, connected components.
//! * [`segfuse`] – consensus fusion of candidate segmentations and the segmentation losses.
//! * [`evalmetrics`] – Dice, Hausdorff, disease extent, paired t-test, Pearson correlation.
//! * [`radiomics`] – first-order, shape, GLSZM and GLRLM features and min-max normalisation.
//! * [`featselect`] – stratified partitions, lasso regularisation paths, consensus selection.
//! * [`classifiers`] – the thirteen screened classifiers, metrics and the screening rule.
//! * [`staging`] – hierarchical severe/non-severe then intubated/deceased majority voting.
//! * [`io`], [`config`], [`synth`], [`pipeline`] – file formats, run configuration, the
//!   synthetic cohort generator and the command compositions used by the CLI.

pub mod classifiers;
pub mod config;
pub mod error;
pub mod evalmetrics;
pub mod featselect;
pub mod io;
pub mod pipeline;
pub mod radiomics;
pub mod segfuse;
pub mod staging;
pub mod synth;
pub mod table;
pub mod volume;

mod numeric;

pub use error::{Error, Result};
