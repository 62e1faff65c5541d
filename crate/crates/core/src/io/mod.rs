//! On-disk formats: MVOL volumes and masks, the cohort manifest, and the
//! prediction and report CSVs.

mod manifest;
mod mvol;
mod reports;

pub use manifest::{read_manifest, write_manifest, Manifest, ManifestRow};
pub use mvol::{
    read_header, read_mask, read_probmap, read_volume, write_mask, write_probmap, write_volume,
    Dtype, MvolHeader,
};
pub use reports::{
    read_labels, read_predictions, write_confusion_csv, write_metrics_csv, write_predictions,
    write_seg_csv, PredictionRow,
};

use std::path::Path;

use crate::error::Error;

pub(crate) fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub(crate) fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| with_path(path, e))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, Error> {
    std::fs::read(path).map_err(|e| with_path(path, e))
}
