//! TOML-backed experiment configuration shared by the CLI subcommands.

use crate::error::{Error, Result};
use crate::metrics::EvalConfig;
use crate::synth::DatasetSpec;
use crate::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Everything needed to reproduce one experiment end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    /// Output directory for run artifacts (logs, checkpoints, reports).
    pub out_dir: PathBuf,
    /// Seeds for multi-seed comparisons.
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            out_dir: PathBuf::from("runs"),
            seeds: vec![1, 2, 3],
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::domain("seeds must not be empty"));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(s).map_err(|e| Error::Format(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(format!("config encode error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::TrainMode;

    #[test]
    fn default_roundtrips_through_toml() {
        let cfg = ExperimentConfig::default();
        let s = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&s).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "seeds = [7]\n\n[train]\nmode = \"ES\"\nepochs_total = 10\n",
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![7]);
        assert_eq!(cfg.train.mode, TrainMode::EasySamples);
        assert_eq!(cfg.train.epochs_total, 10);
        assert_eq!(cfg.dataset, DatasetSpec::default());
    }

    #[test]
    fn invalid_config_is_rejected() {
        // ESP epoch split inconsistent with the total.
        let err = ExperimentConfig::from_toml_str(
            "[train]\nmode = \"SPL-ESP-BC\"\nepochs_total = 10\nepochs_esp = 3\nepochs_spl = 4\n",
        );
        assert!(err.is_err());
        let err = ExperimentConfig::from_toml_str("not = valid = toml");
        assert!(err.is_err());
    }
}
