//! Run configuration shared by the pipeline commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::ScreenThresholds;
use crate::error::{Error, Result};
use crate::radiomics::{ExtractionSettings, NonUniformityMapping};
use crate::staging::EnsembleMode;
use crate::volume::Connectivity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub bin_width_hu: f64,
    pub target_spacing_mm: f64,
    pub cutoff_fraction: f64,
    pub n_splits: usize,
    pub train_fraction: f64,
    pub screening: ScreenThresholds,
    pub nonuniformity: NonUniformityMapping,
    pub mode: EnsembleMode,
    pub connectivity: Connectivity,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            bin_width_hu: 25.0,
            target_spacing_mm: 1.0,
            cutoff_fraction: 0.25,
            n_splits: 10,
            train_fraction: 0.8,
            screening: ScreenThresholds::default(),
            nonuniformity: NonUniformityMapping::default(),
            mode: EnsembleMode::Hierarchical,
            connectivity: Connectivity::TwentySix,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("config: {what}")))
            }
        };
        check(self.bin_width_hu.is_finite() && self.bin_width_hu > 0.0, "bin_width_hu must be > 0")?;
        check(
            self.target_spacing_mm.is_finite() && self.target_spacing_mm > 0.0,
            "target_spacing_mm must be > 0",
        )?;
        check(
            self.cutoff_fraction > 0.0 && self.cutoff_fraction <= 1.0,
            "cutoff_fraction must be in (0, 1]",
        )?;
        check(self.n_splits >= 1, "n_splits must be >= 1")?;
        check(
            self.train_fraction > 0.0 && self.train_fraction < 1.0,
            "train_fraction must be in (0, 1)",
        )?;
        check(
            (0.0..=1.0).contains(&self.screening.min_validation_ba),
            "screening.min_validation_ba must be in [0, 1]",
        )?;
        check(self.screening.max_gap > 0.0, "screening.max_gap must be > 0")?;
        Ok(())
    }

    /// Reads a JSON config; missing fields take their defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_text(path)?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn extraction(&self) -> ExtractionSettings {
        ExtractionSettings {
            bin_width_hu: self.bin_width_hu,
            connectivity: self.connectivity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.bin_width_hu, 25.0);
        assert_eq!(c.n_splits, 10);
        assert_eq!(c.screening.min_validation_ba, 0.60);
        let parsed: RunConfig = serde_json::from_str("{\"seed\": 5}").unwrap();
        assert_eq!(parsed, RunConfig { seed: 5, ..c });
        assert!(serde_json::from_str::<RunConfig>("{\"sed\": 5}").is_err());
    }

    #[test]
    fn invalid_ranges() {
        let c = RunConfig { train_fraction: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
